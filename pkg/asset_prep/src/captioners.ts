/**
 * Caption sources. The production path drives a PNPVQA-style endpoint that
 * generates question-guided captions per image/question pair (and an
 * OSCAR+-style one for generic captions); the fixture captioner fabricates
 * deterministic strings so exports run without any model.
 */

export interface Captioner {
  readonly modelTag: string
  /** Question-guided captions for one image/question pair. */
  caption(imageRef: string, question: string, count: number): Promise<string[]>
}

export class FixtureCaptioner implements Captioner {
  readonly modelTag = 'fixture-captioner-v1'

  async caption(imageRef: string, question: string, count: number): Promise<string[]> {
    if (imageRef.endsWith('.corrupt')) {
      throw new Error(`cannot read image ${imageRef}`)
    }
    const subject = question.replace(/[^a-z0-9 ]/gi, '').trim() || 'scene'
    const captions: string[] = []
    for (let i = 0; i < count; i++) {
      captions.push(`caption ${i} about ${subject} in ${imageRef}`)
    }
    return captions
  }
}

export class HttpCaptioner implements Captioner {
  constructor(
    readonly endpoint: string,
    readonly modelTag: string,
  ) {}

  async caption(imageRef: string, question: string, count: number): Promise<string[]> {
    const resp = await fetch(this.endpoint, {
      method: 'POST',
      headers: { 'content-type': 'application/json' },
      body: JSON.stringify({ image: imageRef, question, count, model: this.modelTag }),
    })
    if (!resp.ok) {
      throw new Error(`captioner endpoint returned ${resp.status} for ${imageRef}`)
    }
    const body = (await resp.json()) as { captions: string[] }
    if (!Array.isArray(body.captions)) {
      throw new Error(`captioner reply missing captions for ${imageRef}`)
    }
    return body.captions
  }
}
