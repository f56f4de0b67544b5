// Application shell: wires the service client, session state and views
// together. All preference math lives server-side; this file only moves
// data between the service and the DOM.

import { ApiClient, ApiError, RecommendationsPayload } from "./api";
import { SessionState, TOTAL_QUESTIONS } from "./state";
import {
  renderGroupScatter, renderRankingScreen, renderRecommendationGrid,
  renderTrainPanel, showInlineError,
} from "./views";

const STORAGE_KEY = "wheelpref.respondent";
const POLL_MS = 1000;

export class App {
  state: SessionState | null = null;
  gridSize = 8;
  private pollTimer: ReturnType<typeof setTimeout> | null = null;
  private trainError: string | null = null;

  constructor(private api: ApiClient, private root: HTMLElement,
              private storage: Storage = localStorage) {}

  async start(): Promise<void> {
    const saved = this.storage.getItem(STORAGE_KEY);
    if (saved) {
      try {
        await this.resume(saved);
        return;
      } catch (err) {
        if (!(err instanceof ApiError && err.status === 404)) throw err;
        this.storage.removeItem(STORAGE_KEY);
      }
    }
    this.renderWelcome();
  }

  private async resume(respondent: string): Promise<void> {
    const info = await this.api.getRespondent(respondent);
    this.state = SessionState.restore(info.id, info.responses, info.status);
    if (info.status === "training") this.schedulePoll();
    await this.render();
  }

  private renderWelcome(): void {
    this.root.replaceChildren();
    const panel = document.createElement("section");
    panel.className = "welcome";
    const heading = document.createElement("h2");
    heading.textContent = "Wheel preference survey";
    panel.appendChild(heading);
    const blurb = document.createElement("p");
    blurb.textContent =
      `Rank ${TOTAL_QUESTIONS} sets of wheel designs to train a personal model.`;
    panel.appendChild(blurb);
    const button = document.createElement("button");
    button.className = "begin";
    button.textContent = "Begin survey";
    button.addEventListener("click", () => { void this.begin(); });
    panel.appendChild(button);
    this.root.appendChild(panel);
  }

  private async begin(): Promise<void> {
    const created = await this.api.createRespondent({ group: "web" });
    this.storage.setItem(STORAGE_KEY, created.id);
    this.state = new SessionState(created.id);
    await this.render();
  }

  async render(): Promise<void> {
    const state = this.state;
    if (!state) return;
    this.root.replaceChildren();
    if (state.status === "trained") {
      await this.renderResults();
      return;
    }
    if (state.surveyComplete() || state.status === "training") {
      this.root.appendChild(renderTrainPanel(state, this.trainError, {
        onTrain: () => { void this.train(); },
      }));
      return;
    }
    const payload = await this.api.getQuestion(state.respondent, state.current);
    const screen = renderRankingScreen(state, payload,
      (id) => this.api.imageUrl(id), {
        onPlace: (designId, index) => {
          state.place(payload.question, designId, index);
          void this.render();
        },
        onUnplace: (designId) => {
          state.unplace(payload.question, designId);
          void this.render();
        },
        onSubmit: () => { void this.submit(payload.question, screenRef()); },
        onBack: () => { state.back(); void this.render(); },
        onNext: () => { state.forward(); void this.render(); },
      });
    const screenRef = () => screen;
    this.root.appendChild(screen);
  }

  private async submit(question: number, screen: HTMLElement): Promise<void> {
    const state = this.state!;
    const draft = state.drafts.get(question);
    if (!draft) return;
    try {
      await this.api.submitRanking(state.respondent, question, draft.ranked);
    } catch (err) {
      // A rejected ranking keeps the draft on screen for correction.
      if (err instanceof ApiError) {
        showInlineError(screen, `Submission rejected (${err.status}): ${err.detail}`);
        return;
      }
      throw err;
    }
    state.markAnswered(question);
    await this.render();
  }

  private async train(): Promise<void> {
    const state = this.state!;
    this.trainError = null;
    try {
      await this.api.startTraining(state.respondent);
    } catch (err) {
      if (err instanceof ApiError) {
        this.trainError = `Training request failed (${err.status}): ${err.detail}`;
        await this.render();
        return;
      }
      throw err;
    }
    state.status = "training";
    this.schedulePoll();
    await this.render();
  }

  private schedulePoll(): void {
    if (this.pollTimer !== null) return;
    this.pollTimer = setTimeout(() => { void this.poll(); }, POLL_MS);
  }

  private async poll(): Promise<void> {
    this.pollTimer = null;
    const state = this.state;
    if (!state) return;
    const info = await this.api.getRespondent(state.respondent);
    if (info.status === "training") {
      this.schedulePoll();
      return;
    }
    state.status = info.status;
    if (info.error) this.trainError = info.error;
    await this.render();
  }

  private async renderResults(): Promise<void> {
    const state = this.state!;
    const panel = document.createElement("section");
    panel.className = "results";
    const heading = document.createElement("h2");
    heading.textContent = "Your recommendations";
    panel.appendChild(heading);

    const controls = document.createElement("div");
    controls.className = "result-controls";
    const label = document.createElement("label");
    label.textContent = "Designs per grid ";
    const selector = document.createElement("select");
    selector.dataset.role = "grid-size";
    for (const n of [4, 8, 12, 16]) {
      const option = document.createElement("option");
      option.value = String(n);
      option.textContent = String(n);
      option.selected = n === this.gridSize;
      selector.appendChild(option);
    }
    selector.addEventListener("change", () => {
      this.gridSize = Number(selector.value);
      void this.render();
    });
    label.appendChild(selector);
    controls.appendChild(label);
    const refresh = document.createElement("button");
    refresh.className = "refresh";
    refresh.textContent = "Refresh";
    refresh.addEventListener("click", () => { void this.render(); });
    controls.appendChild(refresh);
    panel.appendChild(controls);

    let top: RecommendationsPayload;
    try {
      top = await this.api.getRecommendations(state.respondent, this.gridSize);
    } catch (err) {
      // An untrained respondent is guided back to the survey.
      if (err instanceof ApiError && err.status === 409) {
        state.status = "untrained";
        await this.render();
        return;
      }
      throw err;
    }
    panel.appendChild(renderRecommendationGrid(
      `Top ${this.gridSize}`, top.recommendations, (id) => this.api.imageUrl(id)));

    const status = await this.api.getStatus();
    const full = await this.api.getRecommendations(state.respondent, status.designs);
    const bottom = full.recommendations.slice(-this.gridSize);
    panel.appendChild(renderRecommendationGrid(
      `Bottom ${this.gridSize}`, bottom, (id) => this.api.imageUrl(id)));

    try {
      const groups = await this.api.getGroups();
      panel.appendChild(renderGroupScatter(groups, state.respondent));
    } catch (err) {
      if (!(err instanceof ApiError && err.status === 409)) throw err;
      const note = document.createElement("p");
      note.className = "note";
      note.textContent = "Group map appears once enough respondents are trained.";
      panel.appendChild(note);
    }
    this.root.replaceChildren(panel);
  }
}

export function boot(): void {
  const mount = document.getElementById("app");
  if (!mount) throw new Error("missing #app mount point");
  const app = new App(new ApiClient(""), mount);
  void app.start();
}

if (typeof document !== "undefined" && document.getElementById("app")) {
  boot();
}
