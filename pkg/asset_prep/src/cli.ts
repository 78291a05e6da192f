#!/usr/bin/env node
/** Command-line entry point for the export toolkit. */

import yargs from 'yargs'
import { hideBin } from 'yargs/helpers'

import { Captioner, FixtureCaptioner, HttpCaptioner } from './captioners.js'
import { Encoder, HashEncoder, HttpEncoder } from './encoders.js'
import {
  exportCaptions,
  exportEmbeddings,
  exportGenericCaptions,
  makeFixture,
} from './export.js'

function buildCaptioner(endpoint: string | undefined, modelTag: string): Captioner {
  return endpoint ? new HttpCaptioner(endpoint, modelTag) : new FixtureCaptioner()
}

function buildEncoder(endpoint: string | undefined, modelTag: string, dim: number): Encoder {
  return endpoint ? new HttpEncoder(endpoint, modelTag) : new HashEncoder(dim)
}

export async function main(argv: string[]): Promise<number> {
  try {
    await yargs(argv)
      .scriptName('asset-prep')
      .command(
        'export-captions <raw> <out>',
        'Generate question-guided captions per record',
        (y) =>
          y
            .positional('raw', { type: 'string', demandOption: true })
            .positional('out', { type: 'string', demandOption: true })
            .option('count', { type: 'number', default: 50 })
            .option('endpoint', { type: 'string' })
            .option('model-tag', { type: 'string', default: 'pnpvqa-captioner' }),
        async (args) => {
          const result = await exportCaptions(
            args.raw,
            args.out,
            buildCaptioner(args.endpoint, args['model-tag']),
            args.count,
          )
          console.log(`wrote ${result.written} records (${result.skipped.length} skipped)`)
        },
      )
      .command(
        'export-generic-captions <out>',
        'Generate question-agnostic captions per distinct image',
        (y) =>
          y
            .positional('out', { type: 'string', demandOption: true })
            .option('raw', { type: 'string', array: true, demandOption: true })
            .option('count', { type: 'number', default: 2 })
            .option('endpoint', { type: 'string' })
            .option('model-tag', { type: 'string', default: 'oscar-captioner' }),
        async (args) => {
          const result = await exportGenericCaptions(
            args.raw as string[],
            args.out,
            buildCaptioner(args.endpoint, args['model-tag']),
            args.count,
          )
          console.log(`wrote ${result.written} records (${result.skipped.length} skipped)`)
        },
      )
      .command(
        'export-embeddings',
        'Encode captions/questions/images and emit the engine dataset + pack',
        (y) =>
          y
            .option('train-raw', { type: 'string', demandOption: true })
            .option('test-raw', { type: 'string', demandOption: true })
            .option('train-captions', { type: 'string', demandOption: true })
            .option('test-captions', { type: 'string', demandOption: true })
            .option('generic-captions', { type: 'string' })
            .option('out-dir', { type: 'string', demandOption: true })
            .option('endpoint', { type: 'string' })
            .option('model-tag', { type: 'string', default: 'blip-embedder' })
            .option('dim', { type: 'number', default: 16 }),
        async (args) => {
          const result = await exportEmbeddings({
            trainRawPath: args['train-raw'],
            testRawPath: args['test-raw'],
            trainCaptionsPath: args['train-captions'],
            testCaptionsPath: args['test-captions'],
            genericCaptionsPath: args['generic-captions'],
            outDir: args['out-dir'],
            encoder: buildEncoder(args.endpoint, args['model-tag'], args.dim),
          })
          console.log(
            `wrote ${result.trainCount} train / ${result.testCount} test records, ` +
              `${result.vectorCount} vectors (dim ${result.dim})`,
          )
        },
      )
      .command(
        'make-fixture <out-dir>',
        'Produce a small deterministic end-to-end export (no model needed)',
        (y) =>
          y
            .positional('out-dir', { type: 'string', demandOption: true })
            .option('train-count', { type: 'number', default: 30 })
            .option('test-count', { type: 'number', default: 10 })
            .option('captions-per-pair', { type: 'number', default: 12 }),
        async (args) => {
          const result = await makeFixture(
            args['out-dir'],
            args['train-count'],
            args['test-count'],
            args['captions-per-pair'],
          )
          console.log(
            `fixture ready: ${result.trainCount} train / ${result.testCount} test, ` +
              `${result.vectorCount} vectors (dim ${result.dim})`,
          )
        },
      )
      .demandCommand(1)
      .strict()
      .fail((msg, err) => {
        throw err ?? new Error(msg)
      })
      .parseAsync()
    return 0
  } catch (err) {
    console.error(err instanceof Error ? err.message : String(err))
    return 1
  }
}

const invokedDirectly = process.argv[1]?.endsWith('cli.js')
if (invokedDirectly) {
  main(hideBin(process.argv)).then((code) => {
    process.exitCode = code
  })
}
