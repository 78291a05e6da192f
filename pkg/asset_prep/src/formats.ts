/**
 * On-disk formats consumed by the engine.
 *
 * Embedding pack rooted at `<base>.json`:
 *   <base>.json        manifest {dim, count, model_tag, checksum}
 *   <base>.bin         row-major little-endian float32
 *   <base>.index.json  emb_id -> row
 */

import { createHash } from 'node:crypto'
import { mkdirSync, readFileSync, writeFileSync } from 'node:fs'
import { dirname } from 'node:path'

export function writeJsonl(path: string, records: object[]): void {
  mkdirSync(dirname(path), { recursive: true })
  const body = records.map((r) => JSON.stringify(r)).join('\n')
  writeFileSync(path, body.length ? body + '\n' : '')
}

export function readJsonl<T = any>(path: string): T[] {
  return readFileSync(path, 'utf8')
    .split('\n')
    .filter((line) => line.trim().length > 0)
    .map((line) => JSON.parse(line) as T)
}

export interface PackManifest {
  dim: number
  count: number
  model_tag: string
  checksum: string
}

export function packPaths(manifestPath: string): { bin: string; index: string } {
  const base = manifestPath.replace(/\.json$/, '')
  return { bin: `${base}.bin`, index: `${base}.index.json` }
}

export function writeEmbeddingPack(
  manifestPath: string,
  vectors: Map<string, Float32Array>,
  modelTag: string,
): PackManifest {
  if (vectors.size === 0) throw new Error('refusing to write an empty embedding pack')
  const ids = [...vectors.keys()]
  const dim = vectors.get(ids[0])!.length
  const buffer = Buffer.alloc(ids.length * dim * 4)
  const index: Record<string, number> = {}
  ids.forEach((id, row) => {
    const v = vectors.get(id)!
    if (v.length !== dim) {
      throw new Error(`dimension mismatch for ${id}: ${v.length} != ${dim}`)
    }
    for (let i = 0; i < dim; i++) {
      buffer.writeFloatLE(v[i], (row * dim + i) * 4)
    }
    index[id] = row
  })
  const manifest: PackManifest = {
    dim,
    count: ids.length,
    model_tag: modelTag,
    checksum: 'sha256:' + createHash('sha256').update(buffer).digest('hex'),
  }
  mkdirSync(dirname(manifestPath), { recursive: true })
  const { bin, index: indexPath } = packPaths(manifestPath)
  writeFileSync(bin, buffer)
  writeFileSync(indexPath, JSON.stringify(index))
  writeFileSync(manifestPath, JSON.stringify(manifest, null, 2))
  return manifest
}

export function readEmbeddingPack(manifestPath: string): {
  manifest: PackManifest
  vectors: Map<string, Float32Array>
} {
  const manifest = JSON.parse(readFileSync(manifestPath, 'utf8')) as PackManifest
  const { bin, index: indexPath } = packPaths(manifestPath)
  const raw = readFileSync(bin)
  const checksum = 'sha256:' + createHash('sha256').update(raw).digest('hex')
  if (checksum !== manifest.checksum) {
    throw new Error(`checksum mismatch reading ${manifestPath}`)
  }
  const index = JSON.parse(readFileSync(indexPath, 'utf8')) as Record<string, number>
  const vectors = new Map<string, Float32Array>()
  for (const [id, row] of Object.entries(index)) {
    const v = new Float32Array(manifest.dim)
    for (let i = 0; i < manifest.dim; i++) {
      v[i] = raw.readFloatLE((row * manifest.dim + i) * 4)
    }
    vectors.set(id, v)
  }
  return { manifest, vectors }
}
