import { existsSync, mkdtempSync } from 'node:fs'
import { tmpdir } from 'node:os'
import { join } from 'node:path'

import { describe, expect, it, vi } from 'vitest'

import { main } from '../src/cli.js'
import { fixtureRawRecords } from '../src/export.js'
import { readJsonl, writeJsonl } from '../src/formats.js'

const tmp = () => mkdtempSync(join(tmpdir(), 'asset-prep-cli-'))

describe('cli', () => {
  it('make-fixture produces a complete export', async () => {
    const dir = tmp()
    const log = vi.spyOn(console, 'log').mockImplementation(() => {})
    const code = await main(['make-fixture', dir, '--train-count', '6', '--test-count', '2'])
    log.mockRestore()
    expect(code).toBe(0)
    for (const name of [
      'train.jsonl', 'test.jsonl', 'embeddings.json', 'embeddings.bin', 'embeddings.index.json',
    ]) {
      expect(existsSync(join(dir, name))).toBe(true)
    }
  })

  it('export-captions honours --count', async () => {
    const dir = tmp()
    const raw = join(dir, 'raw.jsonl')
    writeJsonl(raw, fixtureRawRecords(2, 0).train)
    const out = join(dir, 'captions.jsonl')
    const log = vi.spyOn(console, 'log').mockImplementation(() => {})
    const code = await main(['export-captions', raw, out, '--count', '7'])
    log.mockRestore()
    expect(code).toBe(0)
    for (const rec of readJsonl<{ captions: string[] }>(out)) {
      expect(rec.captions).toHaveLength(7)
    }
  })

  it('returns 1 on unknown commands', async () => {
    const err = vi.spyOn(console, 'error').mockImplementation(() => {})
    const code = await main(['frobnicate'])
    err.mockRestore()
    expect(code).toBe(1)
  })
})
