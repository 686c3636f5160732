/** DOM layer: renders ConsoleState and routes events into the pure
 * transitions. One in-flight generate request at a time; the score panel
 * runs independently because scoring never mutates generation state. */

import { ConsoleClient, NetworkError, ServiceError } from "./api.js";
import {
  OMEGA_MAX,
  OMEGA_MIN,
  OMEGA_STEP,
  applyPreset,
  beginGenerate,
  buildGenerateRequest,
  canGenerate,
  failGenerate,
  finishGenerate,
  finishReplay,
  initialState,
  replayPlan,
  setSlider,
  type ConsoleState,
} from "./state.js";
import type { Candidate, GenerateRequest, ModelsResponse } from "./types.js";

function el<K extends keyof HTMLElementTagNameMap>(
  tag: K,
  className?: string,
  text?: string,
): HTMLElementTagNameMap[K] {
  const node = document.createElement(tag);
  if (className) node.className = className;
  if (text !== undefined) node.textContent = text;
  return node;
}

function badge(name: string, value: number): HTMLElement {
  const wrap = el("span", "badge");
  wrap.title = `${name}: ${value.toFixed(3)}`;
  wrap.append(el("span", "badge-name", name), el("span", "badge-value", value.toFixed(2)));
  const meter = el("span", "badge-meter");
  const fill = el("span", "badge-fill");
  fill.style.width = `${Math.round(value * 100)}%`;
  meter.append(fill);
  wrap.append(meter);
  return wrap;
}

function candidateCard(candidate: Candidate, label?: string): HTMLElement {
  const card = el("div", "candidate");
  if (label) card.append(el("div", "candidate-label", label));
  card.append(el("p", "candidate-text", candidate.text));
  const badges = el("div", "badges");
  for (const name of Object.keys(candidate.attribute_scores).sort()) {
    badges.append(badge(name, candidate.attribute_scores[name] ?? 0));
  }
  card.append(badges);
  card.append(el("div", "candidate-meta", `ended by ${candidate.terminated_by}`));
  return card;
}

export class Console {
  private state: ConsoleState;
  private readonly client: ConsoleClient;
  private readonly root: HTMLElement;
  private catalog: ModelsResponse = { models: [], presets: {} };

  constructor(root: HTMLElement, client: ConsoleClient) {
    this.root = root;
    this.client = client;
    this.state = initialState([]);
  }

  async start(): Promise<void> {
    try {
      this.catalog = await this.client.models();
    } catch (error) {
      this.root.textContent = "";
      this.root.append(
        el("p", "error", `could not load the model listing: ${(error as Error).message}`),
      );
      return;
    }
    const attributes = this.catalog.models
      .filter((m) => m.kind === "attribute")
      .map((m) => m.name);
    const base = this.catalog.models.find((m) => m.kind === "base");
    this.state = initialState(attributes, base ? base.name : "base");
    this.render();
  }

  private update(state: ConsoleState): void {
    this.state = state;
    this.render();
  }

  private async submitGenerate(request: GenerateRequest, replay: boolean): Promise<void> {
    try {
      const response = await this.client.generate(request);
      this.update(
        replay ? finishReplay(this.state, response) : finishGenerate(this.state, response),
      );
    } catch (error) {
      if (error instanceof ServiceError || error instanceof NetworkError) {
        this.update(failGenerate(this.state, error.message));
      } else {
        throw error;
      }
    }
  }

  private onGenerate(): void {
    if (!canGenerate(this.state)) return;
    const request = buildGenerateRequest(this.state);
    this.update(beginGenerate(this.state));
    void this.submitGenerate(request, false);
  }

  private onReplay(): void {
    const plan = replayPlan(this.state);
    if (plan === null) return;
    this.update(plan.state);
    void this.submitGenerate(plan.request, true);
  }

  private renderSliders(): HTMLElement {
    const panel = el("div", "panel sliders");
    panel.append(el("h2", undefined, "attribute weights"));
    for (const name of Object.keys(this.state.sliders).sort()) {
      const row = el("label", "slider-row");
      row.append(el("span", "slider-name", name));
      const input = el("input");
      input.type = "range";
      input.min = String(OMEGA_MIN);
      input.max = String(OMEGA_MAX);
      input.step = String(OMEGA_STEP);
      input.value = String(this.state.sliders[name] ?? 0);
      input.disabled = this.state.inFlight;
      input.addEventListener("input", () => {
        this.update(setSlider(this.state, name, Number(input.value)));
      });
      row.append(input);
      row.append(el("span", "slider-value", (this.state.sliders[name] ?? 0).toFixed(1)));
      panel.append(row);
    }
    const presets = el("div", "presets");
    for (const presetName of Object.keys(this.catalog.presets).sort()) {
      const button = el("button", undefined, presetName);
      button.disabled = this.state.inFlight;
      button.addEventListener("click", () => {
        this.update(applyPreset(this.state, this.catalog.presets[presetName] ?? {}));
      });
      presets.append(button);
    }
    panel.append(presets);
    return panel;
  }

  private renderPromptPanel(): HTMLElement {
    const panel = el("div", "panel prompt");
    panel.append(el("h2", undefined, "prompt"));
    const textarea = el("textarea");
    textarea.rows = 3;
    textarea.value = this.state.prompt;
    textarea.placeholder = "text to respond to";
    textarea.disabled = this.state.inFlight;
    textarea.addEventListener("input", () => {
      this.state = { ...this.state, prompt: textarea.value };
      generate.disabled = !canGenerate(this.state);
    });
    panel.append(textarea);

    const controls = el("div", "prompt-controls");
    const samples = el("input");
    samples.type = "number";
    samples.min = "1";
    samples.max = "20";
    samples.placeholder = "samples";
    samples.value = this.state.numSamples === null ? "" : String(this.state.numSamples);
    samples.disabled = this.state.inFlight;
    samples.addEventListener("input", () => {
      const parsed = Number.parseInt(samples.value, 10);
      this.state = {
        ...this.state,
        numSamples: Number.isFinite(parsed) && parsed >= 1 ? parsed : null,
      };
    });
    const generate = el("button", "primary", this.state.inFlight ? "working..." : "generate");
    generate.disabled = !canGenerate(this.state);
    generate.addEventListener("click", () => this.onGenerate());
    controls.append(samples, generate);
    panel.append(controls);

    if (this.state.lastError !== null) {
      const line = el("div", "error");
      line.append(el("span", undefined, this.state.lastError));
      const retry = el("button", undefined, "retry");
      retry.disabled = !canGenerate(this.state);
      retry.addEventListener("click", () => this.onGenerate());
      line.append(retry);
      panel.append(line);
    }
    return panel;
  }

  private renderResults(): HTMLElement {
    const panel = el("div", "panel results");
    panel.append(el("h2", undefined, "candidates"));
    const last = this.state.lastResponse;
    if (last === null) {
      panel.append(el("p", "hint", "nothing generated yet"));
      return panel;
    }
    const meta = el("div", "session-meta");
    meta.append(
      el("span", undefined, `session ${last.session_id}`),
      el("span", undefined, `seed ${last.seed}`),
      el("span", undefined, `weights ${JSON.stringify(last.weights)}`),
    );
    const replayButton = el("button", undefined, "replay this seed");
    replayButton.disabled = this.state.inFlight;
    replayButton.addEventListener("click", () => this.onReplay());
    meta.append(replayButton);
    panel.append(meta);

    if (this.state.replay !== null) {
      if (this.state.replay.mismatch) {
        panel.append(
          el(
            "div",
            "warning",
            "replay did not reproduce the recorded candidates; the service's models changed since this session",
          ),
        );
      }
      const pair = el("div", "replay-pair");
      const left = el("div", "replay-column");
      left.append(el("h3", undefined, "original"));
      for (const candidate of last.candidates) left.append(candidateCard(candidate));
      const right = el("div", "replay-column");
      right.append(el("h3", undefined, "replayed"));
      for (const candidate of this.state.replay.response.candidates) {
        right.append(candidateCard(candidate));
      }
      pair.append(left, right);
      panel.append(pair);
    } else {
      for (const candidate of last.candidates) panel.append(candidateCard(candidate));
    }
    panel.append(
      el(
        "p",
        "legend",
        "badges are the service's bag-of-words class probabilities, 0 to 1, one per attribute; they come back with each response and are never computed in the browser",
      ),
    );
    return panel;
  }

  private renderScorePanel(): HTMLElement {
    const panel = el("div", "panel score");
    panel.append(el("h2", undefined, "score arbitrary text"));
    const textarea = el("textarea");
    textarea.rows = 2;
    textarea.placeholder = "text to score";
    const button = el("button", undefined, "score");
    const output = el("div", "badges");
    button.addEventListener("click", () => {
      const text = textarea.value.trim();
      if (!text) return;
      void this.client
        .score(text)
        .then((scored) => {
          output.textContent = "";
          for (const name of Object.keys(scored.attribute_scores).sort()) {
            output.append(badge(name, scored.attribute_scores[name] ?? 0));
          }
        })
        .catch((error: Error) => {
          output.textContent = error.message;
        });
    });
    panel.append(textarea, button, output);
    return panel;
  }

  render(): void {
    this.root.textContent = "";
    this.root.append(
      this.renderSliders(),
      this.renderPromptPanel(),
      this.renderResults(),
      this.renderScorePanel(),
    );
  }
}
