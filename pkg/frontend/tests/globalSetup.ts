/** Boot the real advisor server once for the whole test run. */

import { spawn, type ChildProcess } from "node:child_process";
import { mkdtempSync } from "node:fs";
import { createServer } from "node:net";
import { tmpdir } from "node:os";
import { dirname, join } from "node:path";
import { fileURLToPath } from "node:url";

import type { TestProject } from "vitest/node";

const here = dirname(fileURLToPath(import.meta.url));

async function freePort(): Promise<number> {
  return new Promise((resolve, reject) => {
    const server = createServer();
    server.listen(0, "127.0.0.1", () => {
      const address = server.address();
      if (address && typeof address === "object") {
        const port = address.port;
        server.close(() => resolve(port));
      } else {
        reject(new Error("no port"));
      }
    });
  });
}

async function waitHealthy(base: string): Promise<void> {
  for (let i = 0; i < 150; i += 1) {
    try {
      const response = await fetch(`${base}/healthz`);
      if (response.ok) return;
    } catch {
      // server still booting
    }
    await new Promise((r) => setTimeout(r, 200));
  }
  throw new Error("advisor server did not become healthy");
}

let proc: ChildProcess | undefined;

export default async function setup(project: TestProject): Promise<() => void> {
  const port = await freePort();
  const dataDir = mkdtempSync(join(tmpdir(), "advisor-ui-"));
  proc = spawn(
    "python3",
    [
      "-m", "roboadvisor.cli", "serve",
      "--ratings", join(here, "fixtures", "ratings.csv"),
      "--returns", join(here, "fixtures", "returns.csv"),
      "--data-dir", dataDir,
      "--bind", `127.0.0.1:${port}`,
      "--default-k", "8",
    ],
    { stdio: "ignore" },
  );
  const base = `http://127.0.0.1:${port}`;
  await waitHealthy(base);
  project.provide("advisorUrl", base);
  return () => {
    proc?.kill();
  };
}

declare module "vitest" {
  export interface ProvidedContext {
    advisorUrl: string;
  }
}
