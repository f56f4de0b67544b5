// DOM builders for the three screens. These render service data verbatim:
// no sorting, scoring or filtering happens client-side.

import { GroupsPayload, QuestionPayload, RecommendationItem } from "./api";
import { attachDrag, attachDropZone, DragHandlers } from "./dnd";
import { SessionState, TOTAL_QUESTIONS } from "./state";

function el<K extends keyof HTMLElementTagNameMap>(
    tag: K, className?: string, text?: string): HTMLElementTagNameMap[K] {
  const node = document.createElement(tag);
  if (className) node.className = className;
  if (text !== undefined) node.textContent = text;
  return node;
}

function designCard(designId: string, imageUrl: (id: string) => string,
                    caption?: string): HTMLElement {
  const card = el("figure", "design-card");
  card.dataset.design = designId;
  const img = el("img");
  img.src = imageUrl(designId);
  img.alt = `design ${designId}`;
  card.appendChild(img);
  card.appendChild(el("figcaption", "design-caption", caption ?? designId));
  return card;
}

export interface RankingScreenHandlers extends DragHandlers {
  onSubmit(): void;
  onBack(): void;
  onNext(): void;
}

export function renderRankingScreen(state: SessionState, payload: QuestionPayload,
                                    imageUrl: (id: string) => string,
                                    handlers: RankingScreenHandlers): HTMLElement {
  const draft = state.draftFor(payload.question, payload.design_ids);
  const root = el("section", "ranking-screen");

  const header = el("header");
  const { answered, total } = state.progress();
  header.appendChild(el("h2", undefined, `Question ${payload.question} of ${TOTAL_QUESTIONS}`));
  header.appendChild(el("span", "progress", `${answered}/${total} answered`));
  root.appendChild(header);

  root.appendChild(el("p", "hint",
    "Drag every wheel into the ranking column, best at the top."));

  const board = el("div", "board");
  const tray = el("div", "tray drop-zone");
  tray.dataset.zone = "tray";
  for (const id of draft.tray) {
    const card = designCard(id, imageUrl);
    attachDrag(card, id);
    tray.appendChild(card);
  }
  const ranked = el("ol", "ranked drop-zone");
  ranked.dataset.zone = "ranked";
  draft.ranked.forEach((id, i) => {
    const item = el("li");
    const card = designCard(id, imageUrl, `#${i + 1} ${id}`);
    attachDrag(card, id);
    item.appendChild(card);
    ranked.appendChild(item);
  });
  attachDropZone(ranked, "li", handlers, true);
  attachDropZone(tray, ".design-card", handlers, false);
  board.appendChild(tray);
  board.appendChild(ranked);
  root.appendChild(board);

  const controls = el("div", "controls");
  const back = el("button", "back", "Back");
  back.disabled = !state.canGoBack();
  back.addEventListener("click", handlers.onBack);
  controls.appendChild(back);

  const submit = el("button", "submit", "Submit ranking");
  submit.disabled = !state.submittable(payload.question);
  submit.addEventListener("click", handlers.onSubmit);
  controls.appendChild(submit);

  if (state.answered.has(payload.question) && payload.question < TOTAL_QUESTIONS) {
    const next = el("button", "next", "Next");
    next.addEventListener("click", handlers.onNext);
    controls.appendChild(next);
  }
  root.appendChild(controls);

  const error = el("p", "error");
  error.dataset.role = "error";
  error.hidden = true;
  root.appendChild(error);
  return root;
}

export function showInlineError(root: HTMLElement, message: string): void {
  const slot = root.querySelector<HTMLElement>('[data-role="error"]');
  if (slot) {
    slot.textContent = message;
    slot.hidden = false;
  }
}

export interface TrainPanelHandlers {
  onTrain(): void;
}

export function renderTrainPanel(state: SessionState, error: string | null,
                                 handlers: TrainPanelHandlers): HTMLElement {
  const root = el("section", "train-panel");
  const { answered, total } = state.progress();
  root.appendChild(el("h2", undefined, "Survey complete?"));
  root.appendChild(el("p", "progress", `${answered}/${total} questions answered`));
  const button = el("button", "train", "Train my model");
  button.disabled = !state.canTrain();
  button.addEventListener("click", handlers.onTrain);
  root.appendChild(button);
  if (state.status === "training") {
    root.appendChild(el("p", "status", "Training in progress..."));
  }
  if (error) {
    const slot = el("p", "error", error);
    slot.dataset.role = "error";
    root.appendChild(slot);
  }
  return root;
}

// The grid lists items in exactly the order the service returned them.
export function renderRecommendationGrid(title: string, items: RecommendationItem[],
                                         imageUrl: (id: string) => string): HTMLElement {
  const root = el("section", "recommendation-grid");
  root.appendChild(el("h3", undefined, title));
  const grid = el("div", "grid");
  for (const item of items) {
    const card = designCard(item.design_id, imageUrl,
      `${item.design_id}  utility ${item.utility.toFixed(3)}`);
    card.dataset.utility = String(item.utility);
    grid.appendChild(card);
  }
  root.appendChild(grid);
  return root;
}

export function renderGroupScatter(groups: GroupsPayload, viewer: string): HTMLElement {
  const root = el("section", "group-scatter");
  root.appendChild(el("h3", undefined, `Preference groups (k = ${groups.k})`));
  const svg = document.createElementNS("http://www.w3.org/2000/svg", "svg");
  svg.setAttribute("viewBox", "0 0 400 300");
  const xs = groups.scatter.map((p) => p.x);
  const ys = groups.scatter.map((p) => p.y);
  const xMin = Math.min(...xs), xMax = Math.max(...xs);
  const yMin = Math.min(...ys), yMax = Math.max(...ys);
  const sx = (x: number) => xMax === xMin ? 200 : 20 + 360 * (x - xMin) / (xMax - xMin);
  const sy = (y: number) => yMax === yMin ? 150 : 280 - 260 * (y - yMin) / (yMax - yMin);
  for (const point of groups.scatter) {
    const dot = document.createElementNS("http://www.w3.org/2000/svg", "circle");
    dot.setAttribute("cx", sx(point.x).toFixed(1));
    dot.setAttribute("cy", sy(point.y).toFixed(1));
    dot.setAttribute("r", point.respondent === viewer ? "7" : "4");
    dot.setAttribute("class",
      `cluster-${point.cluster}${point.respondent === viewer ? " viewer" : ""}`);
    const label = document.createElementNS("http://www.w3.org/2000/svg", "title");
    label.textContent = `${point.respondent} (group ${point.cluster})`;
    dot.appendChild(label);
    svg.appendChild(dot);
  }
  root.appendChild(svg);
  return root;
}
