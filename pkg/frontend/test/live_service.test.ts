/** End-to-end pass-through against a live service: the slider map reaches
 * the request body unchanged, and replaying with the returned seed
 * reproduces the candidate texts exactly. */

import { type ChildProcess, spawn } from "node:child_process";
import { fileURLToPath } from "node:url";
import { afterAll, beforeAll, describe, expect, it } from "vitest";

import { ConsoleClient, ServiceError } from "../src/api.js";
import {
  beginGenerate,
  buildGenerateRequest,
  candidateTexts,
  finishGenerate,
  finishReplay,
  initialState,
  replayPlan,
  setSlider,
  type ConsoleState,
} from "../src/state.js";

const LAUNCHER = fileURLToPath(new URL("../scripts/launch_test_service.py", import.meta.url));
const STARTUP_MS = 120_000;

let child: ChildProcess;
let client: ConsoleClient;
let stderrLog = "";

async function waitForPort(process: ChildProcess): Promise<number> {
  return new Promise((resolve, reject) => {
    let buffer = "";
    const timer = setTimeout(
      () => reject(new Error(`service never printed PORT=\n${stderrLog}`)),
      STARTUP_MS,
    );
    process.stdout!.on("data", (chunk: Buffer) => {
      buffer += chunk.toString();
      const match = buffer.match(/PORT=(\d+)/);
      if (match) {
        clearTimeout(timer);
        resolve(Number.parseInt(match[1]!, 10));
      }
    });
    process.on("exit", (code) => {
      clearTimeout(timer);
      reject(new Error(`service exited early with code ${code}\n${stderrLog}`));
    });
  });
}

async function waitUntilServing(baseUrl: string): Promise<void> {
  const deadline = Date.now() + STARTUP_MS;
  while (Date.now() < deadline) {
    try {
      const response = await fetch(`${baseUrl}/models`);
      if (response.ok) return;
    } catch {
      // not listening yet
    }
    await new Promise((resolve) => setTimeout(resolve, 200));
  }
  throw new Error(`service never answered /models\n${stderrLog}`);
}

beforeAll(async () => {
  child = spawn("python3", [LAUNCHER], { stdio: ["ignore", "pipe", "pipe"] });
  child.stderr!.on("data", (chunk: Buffer) => {
    stderrLog += chunk.toString();
  });
  const port = await waitForPort(child);
  client = new ConsoleClient(`http://127.0.0.1:${port}`);
  await waitUntilServing(client.baseUrl);
}, STARTUP_MS);

afterAll(() => {
  child?.kill("SIGTERM");
});

function consoleWithSliders(weights: Record<string, number>): ConsoleState {
  let state = initialState(["detox", "joy", "polite"]);
  state = { ...state, prompt: "people like you ruin everything", numSamples: 2 };
  for (const [name, value] of Object.entries(weights)) {
    state = setSlider(state, name, value);
  }
  return state;
}

describe("live service pass-through", () => {
  it("lists the three attributes the console was built for", async () => {
    const listing = await client.models();
    const attributes = listing.models.filter((m) => m.kind === "attribute").map((m) => m.name);
    expect(attributes.sort()).toEqual(["detox", "joy", "polite"]);
  });

  it("slider map {joy:0.4, polite:0.3, detox:0.3} reaches the service verbatim", async () => {
    const state = consoleWithSliders({ joy: 0.4, polite: 0.3, detox: 0.3 });
    const request = buildGenerateRequest(state);
    expect(request.weights).toEqual({ joy: 0.4, polite: 0.3, detox: 0.3 });

    const response = await client.generate(request);
    expect(response.weights).toEqual({ joy: 0.4, polite: 0.3, detox: 0.3 });
    expect(response.candidates.length).toBe(2);
    for (const candidate of response.candidates) {
      expect(Object.keys(candidate.attribute_scores).sort()).toEqual([
        "detox",
        "joy",
        "polite",
      ]);
    }
  }, 30_000);

  it("replay with the returned seed reproduces identical candidate text", async () => {
    let state = consoleWithSliders({ joy: 0.4, polite: 0.3, detox: 0.3 });
    const first = await client.generate(buildGenerateRequest(state));
    state = finishGenerate(beginGenerate(state), first);

    state = setSlider(state, "joy", 2.0);
    const plan = replayPlan(state);
    expect(plan).not.toBeNull();
    expect(plan!.request.seed).toBe(first.seed);
    expect(plan!.request.weights).toEqual(first.weights);
    expect(plan!.state.sliders).toEqual({ detox: 0.3, joy: 0.4, polite: 0.3 });

    const replayed = await client.generate(plan!.request);
    expect(candidateTexts(replayed)).toEqual(candidateTexts(first));

    const after = finishReplay(plan!.state, replayed);
    expect(after.replay!.mismatch).toBe(false);
  }, 30_000);

  it("all sliders at zero request the uncontrolled baseline", async () => {
    const state = consoleWithSliders({});
    const request = buildGenerateRequest(state);
    expect(request.weights).toEqual({});
    const response = await client.generate(request);
    expect(response.weights).toEqual({});
    expect(response.candidates.length).toBe(2);
  }, 30_000);

  it("service validation errors carry the offending field", async () => {
    await expect(
      client.generate({ prompt: "hello", model: "base", weights: { sarcasm: 1.0 } }),
    ).rejects.toSatisfy(
      (error) => error instanceof ServiceError && error.message.includes("sarcasm"),
    );
  }, 30_000);
});
