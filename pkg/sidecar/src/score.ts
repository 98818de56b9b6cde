/**
 * Greedy token-matching score over contextual embeddings: precision is the
 * mean over candidate tokens of the best cosine against any reference token,
 * recall is symmetric, F1 the harmonic mean.  No idf-weighting in this
 * baseline.
 */

import type { Embedder } from "./embeddings.js";
import { tokenize } from "./tokenize.js";

export interface PairScore {
  p: number;
  r: number;
  f1: number;
}

export interface PairError {
  error: string;
}

export type PairResult = PairScore | PairError;

function dot(a: number[], b: number[]): number {
  let sum = 0;
  for (let i = 0; i < a.length; i++) {
    sum += a[i] * b[i];
  }
  return sum;
}

function sameVector(a: number[], b: number[]): boolean {
  for (let i = 0; i < a.length; i++) {
    if (a[i] !== b[i]) {
      return false;
    }
  }
  return true;
}

function similarity(a: number[], b: number[]): number {
  const sim = dot(a, b);
  // The true cosine of a unit vector with itself is 1; the float dot lands a
  // few ulps under, so equal vectors are matched exactly instead.
  if (sim > 0.999999 && sameVector(a, b)) {
    return 1.0;
  }
  return sim;
}

function bestMatch(vector: number[], pool: number[][]): number {
  let best = -Infinity;
  for (const other of pool) {
    const sim = similarity(vector, other);
    if (sim > best) {
      best = sim;
    }
  }
  // Clamp into [0, 1]: anti-correlated vectors contribute nothing rather
  // than negative mass.
  return Math.min(1, Math.max(0, best));
}

export function greedyMatch(candidate: number[][], reference: number[][]): PairScore {
  const p = candidate.reduce((acc, v) => acc + bestMatch(v, reference), 0) / candidate.length;
  const r = reference.reduce((acc, v) => acc + bestMatch(v, candidate), 0) / reference.length;
  const f1 = p + r > 0 ? (2 * p * r) / (p + r) : 0;
  return { p, r, f1 };
}

export function scorePair(embedder: Embedder, candidate: string, reference: string): PairResult {
  const candTokens = tokenize(candidate);
  const refTokens = tokenize(reference);
  if (candTokens.length === 0 || refTokens.length === 0) {
    return { error: "empty text" };
  }
  return greedyMatch(embedder.embedTokens(candTokens), embedder.embedTokens(refTokens));
}

export function scorePairs(
  embedder: Embedder,
  pairs: ReadonlyArray<{ candidate: string; reference: string }>,
): PairResult[] {
  return pairs.map(({ candidate, reference }) => scorePair(embedder, candidate, reference));
}
