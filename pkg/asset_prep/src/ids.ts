/** Embedding id convention shared with the engine: `<kind>:<sample_id>:<index>`. */

export type EmbKind = 'cap' | 'q' | 'img'

export function makeEmbId(kind: EmbKind, sampleId: string, index: number): string {
  if (sampleId.includes(':')) {
    throw new Error(`sample id must not contain ':': ${sampleId}`)
  }
  return `${kind}:${sampleId}:${index}`
}

export function parseEmbId(embId: string): { kind: EmbKind; sampleId: string; index: number } {
  const parts = embId.split(':')
  if (parts.length !== 3) throw new Error(`malformed emb_id: ${embId}`)
  const [kind, sampleId, indexStr] = parts
  if (kind !== 'cap' && kind !== 'q' && kind !== 'img') {
    throw new Error(`unknown emb_id kind: ${embId}`)
  }
  const index = Number(indexStr)
  if (!Number.isInteger(index) || index < 0) {
    throw new Error(`bad emb_id index: ${embId}`)
  }
  return { kind, sampleId, index }
}
