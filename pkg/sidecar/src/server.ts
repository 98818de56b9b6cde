/**
 * HTTP surface: POST /v1/score scores candidate/reference pairs in request
 * order; GET /healthz reports the pinned embedding model id.
 */

import express, { type Express } from "express";
import { z } from "zod";

import type { Embedder } from "./embeddings.js";
import { scorePairs } from "./score.js";

const scoreRequestSchema = z.object({
  pairs: z
    .array(
      z.object({
        candidate: z.string(),
        reference: z.string(),
      }),
    )
    .min(1),
});

export function makeApp(embedder: Embedder): Express {
  const app = express();
  app.use(express.json({ limit: "16mb" }));

  app.get("/healthz", (_req, res) => {
    res.json({ model: embedder.id });
  });

  app.post("/v1/score", (req, res) => {
    const parsed = scoreRequestSchema.safeParse(req.body);
    if (!parsed.success) {
      res.status(400).json({ error: parsed.error.issues[0]?.message ?? "invalid request" });
      return;
    }
    res.json({ scores: scorePairs(embedder, parsed.data.pairs) });
  });

  return app;
}
