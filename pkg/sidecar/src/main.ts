/**
 * Entry point: pick the embedding backend, then serve.
 *
 * A model that fails to load aborts startup; the service never falls back
 * silently, so a /healthz probe always tells the truth about what scored.
 */

import path from "node:path";
import { fileURLToPath } from "node:url";
import yargs from "yargs";
import { hideBin } from "yargs/helpers";

import { loadTableEmbedder, StubEmbedder, type Embedder } from "./embeddings.js";
import { makeApp } from "./server.js";

const DEFAULT_MODEL = path.join(
  path.dirname(fileURLToPath(import.meta.url)),
  "..",
  "models",
  "tiny-embed-v1.json",
);

async function main(): Promise<void> {
  const argv = await yargs(hideBin(process.argv))
    .option("port", { type: "number", default: 8091 })
    .option("stub", {
      type: "boolean",
      default: false,
      describe: "hashed-unit-vector embeddings; no model file needed",
    })
    .option("model", {
      type: "string",
      default: DEFAULT_MODEL,
      describe: "path to the pinned embedding-table model JSON",
    })
    .strict()
    .parse();

  let embedder: Embedder;
  if (argv.stub) {
    embedder = new StubEmbedder();
  } else {
    try {
      embedder = loadTableEmbedder(argv.model);
    } catch (err) {
      console.error(`failed to load embedding model ${argv.model}: ${err}`);
      process.exit(1);
    }
  }

  const app = makeApp(embedder);
  app.listen(argv.port, () => {
    console.log(`bertscore sidecar on :${argv.port} (model: ${embedder.id})`);
  });
}

void main();
