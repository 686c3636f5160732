/** Console state and the pure transitions behind every UI action.
 *
 * The slider-to-request mapping lives here as plain functions so the
 * pass-through rules (clamping, zero omission, replay resetting sliders to
 * the recorded weights) are testable without a browser or a service.
 */

import type { GenerateRequest, GenerateResponse } from "./types.js";

export const OMEGA_MIN = 0;
export const OMEGA_MAX = 4;
export const OMEGA_STEP = 0.1;

export interface ReplayResult {
  response: GenerateResponse;
  mismatch: boolean;
}

export interface ConsoleState {
  prompt: string;
  model: string;
  sliders: Record<string, number>;
  numSamples: number | null;
  inFlight: boolean;
  lastResponse: GenerateResponse | null;
  lastError: string | null;
  replay: ReplayResult | null;
}

export function initialState(attributes: string[], model = "base"): ConsoleState {
  const sliders: Record<string, number> = {};
  for (const name of attributes) sliders[name] = 0;
  return {
    prompt: "",
    model,
    sliders,
    numSamples: null,
    inFlight: false,
    lastResponse: null,
    lastError: null,
    replay: null,
  };
}

/** Snap to the 0.1 grid and clamp into [0, 4]; anything unusable is 0. */
export function clampOmega(value: number): number {
  if (!Number.isFinite(value)) return OMEGA_MIN;
  const snapped = Math.round(value * 10) / 10;
  return Math.min(OMEGA_MAX, Math.max(OMEGA_MIN, snapped));
}

/** The request's weights map: clamped slider values with zeros omitted. */
export function buildWeights(sliders: Record<string, number>): Record<string, number> {
  const weights: Record<string, number> = {};
  for (const name of Object.keys(sliders).sort()) {
    const omega = clampOmega(sliders[name] ?? 0);
    if (omega > 0) weights[name] = omega;
  }
  return weights;
}

export function setSlider(state: ConsoleState, name: string, value: number): ConsoleState {
  if (!(name in state.sliders)) return state;
  return { ...state, sliders: { ...state.sliders, [name]: clampOmega(value) } };
}

/** Presets replace the whole slider map; attributes absent from the preset
 * drop to zero rather than keeping stale values. */
export function applyPreset(
  state: ConsoleState,
  preset: Record<string, number>,
): ConsoleState {
  const sliders: Record<string, number> = {};
  for (const name of Object.keys(state.sliders)) {
    sliders[name] = clampOmega(preset[name] ?? 0);
  }
  return { ...state, sliders };
}

export function canGenerate(state: ConsoleState): boolean {
  return state.prompt.trim().length > 0 && !state.inFlight;
}

export function buildGenerateRequest(state: ConsoleState, seed?: number): GenerateRequest {
  const request: GenerateRequest = {
    prompt: state.prompt,
    model: state.model,
    weights: buildWeights(state.sliders),
  };
  if (seed !== undefined) request.seed = seed;
  if (state.numSamples !== null) request.num_samples = state.numSamples;
  return request;
}

export function beginGenerate(state: ConsoleState): ConsoleState {
  return { ...state, inFlight: true, lastError: null };
}

export function finishGenerate(state: ConsoleState, response: GenerateResponse): ConsoleState {
  return { ...state, inFlight: false, lastResponse: response, replay: null };
}

/** Failures keep the previous candidates on screen so the operator can
 * retry without losing anything. */
export function failGenerate(state: ConsoleState, message: string): ConsoleState {
  return { ...state, inFlight: false, lastError: message };
}

/** The replay request re-issues the recorded session: same prompt, model,
 * weights and sample count, with the seed the service returned. Sliders are
 * reset to the recorded weights first, so what the operator sees matches
 * what is being sent even after they moved things around. */
export function replayPlan(
  state: ConsoleState,
): { state: ConsoleState; request: GenerateRequest } | null {
  const last = state.lastResponse;
  if (last === null || state.inFlight) return null;
  const sliders: Record<string, number> = {};
  for (const name of Object.keys(state.sliders)) {
    sliders[name] = clampOmega(last.weights[name] ?? 0);
  }
  const reset: ConsoleState = {
    ...state,
    prompt: last.prompt,
    model: last.model,
    sliders,
    numSamples: last.num_samples,
    inFlight: true,
    lastError: null,
  };
  return {
    state: reset,
    request: {
      prompt: last.prompt,
      model: last.model,
      weights: { ...last.weights },
      seed: last.seed,
      num_samples: last.num_samples,
    },
  };
}

export function candidateTexts(response: GenerateResponse): string[] {
  return response.candidates.map((candidate) => candidate.text);
}

/** A replay that fails to reproduce the recorded texts means the service's
 * models changed since the session was logged. */
export function finishReplay(state: ConsoleState, response: GenerateResponse): ConsoleState {
  const original = state.lastResponse;
  const mismatch =
    original === null ||
    JSON.stringify(candidateTexts(original)) !== JSON.stringify(candidateTexts(response));
  return { ...state, inFlight: false, replay: { response, mismatch } };
}
