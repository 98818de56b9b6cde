/**
 * Token embedding backends.
 *
 * Stub mode derives a unit vector for every token by hashing it (sha256,
 * counter-expanded), so identical tokens match exactly and scores are
 * reproducible across processes and platforms with zero model state.
 *
 * Table mode loads a pinned embedding-table model from disk and mixes each
 * token's vector with its neighbors, so the same token embeds differently in
 * different contexts; the model id is echoed by /healthz and ties golden
 * fixtures to a model version.
 */

import { createHash } from "node:crypto";
import { readFileSync } from "node:fs";

export interface Embedder {
  readonly id: string;
  /** One unit vector per token, in token order. */
  embedTokens(tokens: string[]): number[][];
}

export const STUB_DIM = 256;

function normalize(vector: number[]): number[] {
  const norm = Math.sqrt(vector.reduce((acc, v) => acc + v * v, 0));
  return norm > 0 ? vector.map((v) => v / norm) : vector;
}

/** Deterministic unit vector from a token string. */
export function hashedVector(token: string, dim: number): number[] {
  const values: number[] = [];
  for (let block = 0; values.length < dim; block++) {
    const digest = createHash("sha256").update(`${token}#${block}`).digest();
    for (let offset = 0; offset + 4 <= digest.length && values.length < dim; offset += 4) {
      values.push(digest.readUInt32BE(offset) / 2 ** 31 - 1.0);
    }
  }
  return normalize(values);
}

export class StubEmbedder implements Embedder {
  readonly id = "stub";

  embedTokens(tokens: string[]): number[][] {
    return tokens.map((token) => hashedVector(token, STUB_DIM));
  }
}

interface TableModelFile {
  id: string;
  dim: number;
  context_alpha: number;
  vectors: Record<string, number[]>;
}

export class TableEmbedder implements Embedder {
  readonly id: string;
  private readonly dim: number;
  private readonly alpha: number;
  private readonly vectors: Map<string, number[]>;

  constructor(model: TableModelFile) {
    if (!model.id || !Number.isInteger(model.dim) || model.dim < 1) {
      throw new Error("embedding model needs an id and a positive integer dim");
    }
    this.id = model.id;
    this.dim = model.dim;
    this.alpha = model.context_alpha ?? 0;
    this.vectors = new Map();
    for (const [token, vector] of Object.entries(model.vectors)) {
      if (vector.length !== model.dim) {
        throw new Error(`vector for ${JSON.stringify(token)} has wrong length`);
      }
      this.vectors.set(token, normalize(vector));
    }
  }

  private baseVector(token: string): number[] {
    // Out-of-vocabulary tokens fall back to the deterministic hash so two
    // occurrences of the same unknown word still match each other.
    return this.vectors.get(token) ?? hashedVector(token, this.dim);
  }

  embedTokens(tokens: string[]): number[][] {
    const base = tokens.map((token) => this.baseVector(token));
    return base.map((vector, i) => {
      const mixed = vector.slice();
      for (const neighbor of [base[i - 1], base[i + 1]]) {
        if (neighbor) {
          for (let d = 0; d < this.dim; d++) {
            mixed[d] += this.alpha * neighbor[d];
          }
        }
      }
      return normalize(mixed);
    });
  }
}

/** Load the pinned table model; any failure here must abort startup. */
export function loadTableEmbedder(path: string): TableEmbedder {
  const raw = readFileSync(path, "utf-8");
  return new TableEmbedder(JSON.parse(raw) as TableModelFile);
}
