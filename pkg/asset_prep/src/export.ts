/**
 * Export pipeline: raw VQA records in, engine-ready assets out.
 *
 * Raw record (JSONL): {id, question, image_id, answer?, human_answers?,
 * question_type?}. Train records carry `answer`; test records usually carry
 * `human_answers` (exactly 10 when present).
 *
 * Stages:
 *   exportCaptions          question-guided captions per (image, question) pair
 *   exportGenericCaptions   question-agnostic captions per image
 *   exportEmbeddings        engine train.jsonl / test.jsonl + one embedding pack
 *   makeFixture             small deterministic end-to-end export for smoke tests
 */

import { join } from 'node:path'

import { Captioner, FixtureCaptioner } from './captioners.js'
import { Encoder, HashEncoder } from './encoders.js'
import { readJsonl, writeEmbeddingPack, writeJsonl } from './formats.js'
import { makeEmbId } from './ids.js'

export interface RawRecord {
  id: string
  question: string
  image_id: string
  answer?: string
  human_answers?: string[]
  question_type?: string
}

export interface CaptionRecord {
  id: string
  image_id: string
  captions: string[]
}

export interface CaptionExportResult {
  written: number
  skipped: { id: string; reason: string }[]
}

function validateRaw(records: RawRecord[], path: string): void {
  const seen = new Set<string>()
  for (const rec of records) {
    if (!rec.id || !rec.question || !rec.image_id) {
      throw new Error(`${path}: record missing id/question/image_id: ${JSON.stringify(rec)}`)
    }
    if (seen.has(rec.id)) throw new Error(`${path}: duplicate id ${rec.id}`)
    seen.add(rec.id)
  }
}

/**
 * Generate `count` question-guided captions per record. Records whose image
 * cannot be captioned are skipped and logged rather than aborting the export.
 */
export async function exportCaptions(
  rawPath: string,
  outPath: string,
  captioner: Captioner,
  count = 50,
  log: (msg: string) => void = console.error,
): Promise<CaptionExportResult> {
  const records = readJsonl<RawRecord>(rawPath)
  validateRaw(records, rawPath)
  const out: CaptionRecord[] = []
  const skipped: { id: string; reason: string }[] = []
  for (const rec of records) {
    try {
      const captions = await captioner.caption(rec.image_id, rec.question, count)
      if (captions.length !== count) {
        throw new Error(`captioner returned ${captions.length} captions, expected ${count}`)
      }
      out.push({ id: rec.id, image_id: rec.image_id, captions })
    } catch (err) {
      const reason = err instanceof Error ? err.message : String(err)
      skipped.push({ id: rec.id, reason })
      log(`skipping ${rec.id}: ${reason}`)
    }
  }
  writeJsonl(outPath, out)
  return { written: out.length, skipped }
}

export interface GenericCaptionRecord {
  image_id: string
  captions: string[]
}

/** Question-agnostic captions, one record per distinct image. */
export async function exportGenericCaptions(
  rawPaths: string[],
  outPath: string,
  captioner: Captioner,
  count = 2,
  log: (msg: string) => void = console.error,
): Promise<CaptionExportResult> {
  const imageIds: string[] = []
  const seen = new Set<string>()
  for (const rawPath of rawPaths) {
    const records = readJsonl<RawRecord>(rawPath)
    validateRaw(records, rawPath)
    for (const rec of records) {
      if (!seen.has(rec.image_id)) {
        seen.add(rec.image_id)
        imageIds.push(rec.image_id)
      }
    }
  }
  const out: GenericCaptionRecord[] = []
  const skipped: { id: string; reason: string }[] = []
  for (const imageId of imageIds) {
    try {
      const captions = await captioner.caption(imageId, '', count)
      out.push({ image_id: imageId, captions: captions.slice(0, count) })
    } catch (err) {
      const reason = err instanceof Error ? err.message : String(err)
      skipped.push({ id: imageId, reason })
      log(`skipping image ${imageId}: ${reason}`)
    }
  }
  writeJsonl(outPath, out)
  return { written: out.length, skipped }
}

export interface EmbeddingExportOptions {
  trainRawPath: string
  testRawPath: string
  trainCaptionsPath: string
  testCaptionsPath: string
  genericCaptionsPath?: string
  outDir: string
  encoder: Encoder
}

export interface EmbeddingExportResult {
  trainCount: number
  testCount: number
  vectorCount: number
  dim: number
}

function cosineDot(a: Float32Array, b: Float32Array): number {
  let s = 0
  for (let i = 0; i < a.length; i++) s += a[i] * b[i]
  return s
}

/**
 * Emit train.jsonl, test.jsonl, and a single shared embedding pack
 * (embeddings.json/.bin/.index.json) under `outDir`.
 *
 * Train captions are re-ordered by descending cosine(caption, image) so the
 * engine can take a prefix directly; test captions keep their emb_ids so the
 * engine ranks them itself. Everything is buffered in memory and written only
 * after every vector exists — an encoder failure leaves no partial pack.
 */
export async function exportEmbeddings(
  opts: EmbeddingExportOptions,
): Promise<EmbeddingExportResult> {
  const trainRaw = readJsonl<RawRecord>(opts.trainRawPath)
  const testRaw = readJsonl<RawRecord>(opts.testRawPath)
  validateRaw(trainRaw, opts.trainRawPath)
  validateRaw(testRaw, opts.testRawPath)

  const indexCaptions = (path: string): Map<string, CaptionRecord> => {
    const map = new Map<string, CaptionRecord>()
    for (const rec of readJsonl<CaptionRecord>(path)) map.set(rec.id, rec)
    return map
  }
  const trainCaps = indexCaptions(opts.trainCaptionsPath)
  const testCaps = indexCaptions(opts.testCaptionsPath)

  const genericByImage = new Map<string, string[]>()
  if (opts.genericCaptionsPath) {
    for (const rec of readJsonl<GenericCaptionRecord>(opts.genericCaptionsPath)) {
      genericByImage.set(rec.image_id, rec.captions)
    }
  }

  // Only records that survived captioning are exported.
  const train = trainRaw.filter((r) => trainCaps.has(r.id))
  const test = testRaw.filter((r) => testCaps.has(r.id))
  for (const rec of train) {
    if (!rec.answer) throw new Error(`train record ${rec.id} missing answer`)
  }
  for (const rec of test) {
    const humans = rec.human_answers ?? []
    if (humans.length !== 0 && humans.length !== 10) {
      throw new Error(`test record ${rec.id} has ${humans.length} human answers (need 0 or 10)`)
    }
  }

  const vectors = new Map<string, Float32Array>()
  const put = (id: string, v: Float32Array) => {
    if (vectors.has(id)) throw new Error(`duplicate emb_id ${id}`)
    vectors.set(id, v)
  }

  const imageIds = [...new Set([...train, ...test].map((r) => r.image_id))]
  const imageVecs = new Map<string, Float32Array>()
  const encodedImages = await opts.encoder.encodeImage(imageIds)
  imageIds.forEach((imageId, i) => imageVecs.set(imageId, encodedImages[i]))

  const trainRecords: object[] = []
  for (const rec of train) {
    const caps = trainCaps.get(rec.id)!.captions
    const [qVec] = await opts.encoder.encodeText([rec.question])
    const capVecs = await opts.encoder.encodeText(caps)
    const img = imageVecs.get(rec.image_id)!
    // descending image similarity; ties keep original caption order
    const order = caps
      .map((text, i) => ({ text, i, sim: cosineDot(capVecs[i], img) }))
      .sort((a, b) => b.sim - a.sim || a.i - b.i)
    put(makeEmbId('q', rec.id, 0), qVec)
    put(makeEmbId('img', rec.id, 0), img.slice())
    const record: Record<string, unknown> = {
      id: rec.id,
      question: rec.question,
      answer: rec.answer,
      captions: order.map((o) => o.text),
      question_emb_id: makeEmbId('q', rec.id, 0),
      image_emb_id: makeEmbId('img', rec.id, 0),
    }
    const generic = genericByImage.get(rec.image_id)
    if (generic?.length) record.generic_captions = generic
    trainRecords.push(record)
  }

  const testRecords: object[] = []
  for (const rec of test) {
    const caps = testCaps.get(rec.id)!.captions
    const [qVec] = await opts.encoder.encodeText([rec.question])
    const capVecs = await opts.encoder.encodeText(caps)
    put(makeEmbId('q', rec.id, 0), qVec)
    put(makeEmbId('img', rec.id, 0), imageVecs.get(rec.image_id)!.slice())
    const entries = caps.map((text, i) => {
      const embId = makeEmbId('cap', rec.id, i)
      put(embId, capVecs[i])
      return { text, emb_id: embId }
    })
    const record: Record<string, unknown> = {
      id: rec.id,
      question: rec.question,
      caption_entries: entries,
      image_emb_id: makeEmbId('img', rec.id, 0),
      question_emb_id: makeEmbId('q', rec.id, 0),
    }
    if (rec.human_answers?.length) record.human_answers = rec.human_answers
    const generic = genericByImage.get(rec.image_id)
    if (generic?.length) record.generic_captions = generic
    if (rec.question_type) record.question_type = rec.question_type
    testRecords.push(record)
  }

  // Nothing touches disk until every vector has been produced.
  const manifest = writeEmbeddingPack(
    join(opts.outDir, 'embeddings.json'),
    vectors,
    opts.encoder.modelTag,
  )
  writeJsonl(join(opts.outDir, 'train.jsonl'), trainRecords)
  writeJsonl(join(opts.outDir, 'test.jsonl'), testRecords)
  return {
    trainCount: trainRecords.length,
    testCount: testRecords.length,
    vectorCount: manifest.count,
    dim: manifest.dim,
  }
}

const FIXTURE_ANIMALS = [
  'dog', 'cat', 'horse', 'zebra', 'otter', 'eagle', 'panda', 'tiger', 'llama', 'crow',
]

/** Deterministic raw records used by `make-fixture` and the tests. */
export function fixtureRawRecords(
  trainCount = 30,
  testCount = 10,
): { train: RawRecord[]; test: RawRecord[] } {
  const train: RawRecord[] = []
  for (let i = 0; i < trainCount; i++) {
    const animal = FIXTURE_ANIMALS[i % FIXTURE_ANIMALS.length]
    train.push({
      id: `tr${String(i).padStart(2, '0')}`,
      question: `what animal is in picture ${i}`,
      answer: animal,
      image_id: `img-train-${i}.jpg`,
    })
  }
  const test: RawRecord[] = []
  for (let i = 0; i < testCount; i++) {
    const animal = FIXTURE_ANIMALS[(i + 3) % FIXTURE_ANIMALS.length]
    const humans = Array.from({ length: 10 }, (_, j) => (j < 6 ? animal : `not ${animal}`))
    test.push({
      id: `te${String(i).padStart(2, '0')}`,
      question: `what animal appears in test scene ${i}`,
      human_answers: humans,
      image_id: `img-test-${i}.jpg`,
      question_type: i % 2 === 0 ? 'animal' : 'other',
    })
  }
  return { train, test }
}

/**
 * End-to-end fixture export: raw records -> captions -> embeddings, using the
 * fixture captioner and the hash encoder so no model endpoint is needed.
 */
export async function makeFixture(
  outDir: string,
  trainCount = 30,
  testCount = 10,
  captionsPerPair = 12,
): Promise<EmbeddingExportResult> {
  const { train, test } = fixtureRawRecords(trainCount, testCount)
  writeJsonl(join(outDir, 'raw_train.jsonl'), train)
  writeJsonl(join(outDir, 'raw_test.jsonl'), test)
  const captioner = new FixtureCaptioner()
  await exportCaptions(
    join(outDir, 'raw_train.jsonl'),
    join(outDir, 'captions_train.jsonl'),
    captioner,
    captionsPerPair,
  )
  await exportCaptions(
    join(outDir, 'raw_test.jsonl'),
    join(outDir, 'captions_test.jsonl'),
    captioner,
    captionsPerPair,
  )
  await exportGenericCaptions(
    [join(outDir, 'raw_train.jsonl'), join(outDir, 'raw_test.jsonl')],
    join(outDir, 'generic_captions.jsonl'),
    captioner,
  )
  return exportEmbeddings({
    trainRawPath: join(outDir, 'raw_train.jsonl'),
    testRawPath: join(outDir, 'raw_test.jsonl'),
    trainCaptionsPath: join(outDir, 'captions_train.jsonl'),
    testCaptionsPath: join(outDir, 'captions_test.jsonl'),
    genericCaptionsPath: join(outDir, 'generic_captions.jsonl'),
    outDir,
    encoder: new HashEncoder(),
  })
}
