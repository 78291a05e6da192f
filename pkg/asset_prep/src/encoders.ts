/**
 * Text/image encoders. Production exports call a BLIP-style embedding
 * endpoint; the hash encoder is a deterministic GPU-free stand-in used for
 * the checked-in fixture and CI. Vectors are emitted unit-norm either way.
 */

import { createHash } from 'node:crypto'

export interface Encoder {
  readonly modelTag: string
  encodeText(texts: string[]): Promise<Float32Array[]>
  encodeImage(imageRefs: string[]): Promise<Float32Array[]>
}

export function normalizeInPlace(v: Float32Array): Float32Array {
  let sumSq = 0
  for (const x of v) sumSq += x * x
  const norm = Math.sqrt(sumSq)
  if (norm === 0) throw new Error('zero-norm vector from encoder')
  for (let i = 0; i < v.length; i++) v[i] = v[i] / norm
  return v
}

/** Deterministic pseudo-embedding: sha256-seeded values, then L2 normalize. */
export function hashVector(key: string, dim: number): Float32Array {
  const v = new Float32Array(dim)
  let counter = 0
  let offset = 0
  let digest = Buffer.alloc(0)
  for (let i = 0; i < dim; i++) {
    if (offset + 4 > digest.length) {
      digest = createHash('sha256').update(`${key}#${counter++}`).digest()
      offset = 0
    }
    // uniform in [-1, 1)
    v[i] = (digest.readUInt32LE(offset) / 2 ** 31) - 1
    offset += 4
  }
  return normalizeInPlace(v)
}

export class HashEncoder implements Encoder {
  readonly modelTag: string

  constructor(readonly dim: number = 16) {
    this.modelTag = `hash-encoder-v1:d${dim}`
  }

  async encodeText(texts: string[]): Promise<Float32Array[]> {
    return texts.map((t) => hashVector(`text:${t}`, this.dim))
  }

  async encodeImage(imageRefs: string[]): Promise<Float32Array[]> {
    return imageRefs.map((r) => hashVector(`image:${r}`, this.dim))
  }
}

/**
 * Client for an embedding endpoint: POST {inputs, mode} -> {vectors}.
 * Any failure aborts the export; partial embedding files are never written.
 */
export class HttpEncoder implements Encoder {
  constructor(
    readonly endpoint: string,
    readonly modelTag: string,
    readonly batchSize: number = 64,
  ) {}

  private async encode(inputs: string[], mode: 'text' | 'image'): Promise<Float32Array[]> {
    const out: Float32Array[] = []
    for (let i = 0; i < inputs.length; i += this.batchSize) {
      const batch = inputs.slice(i, i + this.batchSize)
      const resp = await fetch(this.endpoint, {
        method: 'POST',
        headers: { 'content-type': 'application/json' },
        body: JSON.stringify({ inputs: batch, mode, model: this.modelTag }),
      })
      if (!resp.ok) {
        throw new Error(`encoder endpoint returned ${resp.status} for ${mode} batch at ${i}`)
      }
      const body = (await resp.json()) as { vectors: number[][] }
      if (!Array.isArray(body.vectors) || body.vectors.length !== batch.length) {
        throw new Error(`encoder reply has ${body.vectors?.length} vectors for ${batch.length} inputs`)
      }
      for (const values of body.vectors) {
        out.push(normalizeInPlace(Float32Array.from(values)))
      }
    }
    return out
  }

  encodeText(texts: string[]): Promise<Float32Array[]> {
    return this.encode(texts, 'text')
  }

  encodeImage(imageRefs: string[]): Promise<Float32Array[]> {
    return this.encode(imageRefs, 'image')
  }
}
