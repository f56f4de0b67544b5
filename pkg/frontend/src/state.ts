// Session state for one respondent's survey: which question is on screen,
// the per-question ranking drafts, what has been answered, and the training
// status. Pure data + transition methods, no DOM and no network.

export const TOTAL_QUESTIONS = 16;
export const DESIGNS_PER_QUESTION = 6;

export type TrainingStatus = "untrained" | "training" | "trained";

export interface Draft {
  ranked: string[]; // best first, the order being built
  tray: string[];   // not yet placed
}

export class SessionState {
  respondent: string;
  current = 1;
  drafts = new Map<number, Draft>();
  answered = new Set<number>();
  status: TrainingStatus = "untrained";

  constructor(respondent: string) {
    this.respondent = respondent;
  }

  // Reload restores from the service: `responses` distinct questions are
  // journaled server-side, so the linear flow resumes at the first one after.
  static restore(respondent: string, responses: number, status: TrainingStatus): SessionState {
    const s = new SessionState(respondent);
    for (let q = 1; q <= Math.min(responses, TOTAL_QUESTIONS); q++) s.answered.add(q);
    s.current = Math.min(responses + 1, TOTAL_QUESTIONS);
    s.status = status;
    return s;
  }

  draftFor(question: number, designIds: string[]): Draft {
    let draft = this.drafts.get(question);
    if (!draft) {
      draft = { ranked: [], tray: [...designIds] };
      this.drafts.set(question, draft);
    }
    return draft;
  }

  // Move a design into the ranked column at `index`, or within it.
  place(question: number, designId: string, index: number): void {
    const draft = this.drafts.get(question);
    if (!draft) throw new Error(`no draft for question ${question}`);
    const fromTray = draft.tray.indexOf(designId);
    const fromRank = draft.ranked.indexOf(designId);
    if (fromTray < 0 && fromRank < 0) throw new Error(`unknown design ${designId}`);
    if (fromTray >= 0) draft.tray.splice(fromTray, 1);
    if (fromRank >= 0) draft.ranked.splice(fromRank, 1);
    const at = Math.max(0, Math.min(index, draft.ranked.length));
    draft.ranked.splice(at, 0, designId);
  }

  // Move a design back out of the ranked column.
  unplace(question: number, designId: string): void {
    const draft = this.drafts.get(question);
    if (!draft) throw new Error(`no draft for question ${question}`);
    const at = draft.ranked.indexOf(designId);
    if (at < 0) return;
    draft.ranked.splice(at, 1);
    draft.tray.push(designId);
  }

  // Submittable only when every design is placed in a strict order.
  submittable(question: number): boolean {
    const draft = this.drafts.get(question);
    if (!draft) return false;
    return draft.tray.length === 0 &&
      draft.ranked.length === DESIGNS_PER_QUESTION &&
      new Set(draft.ranked).size === DESIGNS_PER_QUESTION;
  }

  // Recording an answer advances to the next unanswered question, if any.
  markAnswered(question: number): void {
    this.answered.add(question);
    for (let q = 1; q <= TOTAL_QUESTIONS; q++) {
      if (!this.answered.has(q)) {
        this.current = q;
        return;
      }
    }
    this.current = TOTAL_QUESTIONS;
  }

  canGoBack(): boolean {
    return this.current > 1 && this.status === "untrained";
  }

  back(): void {
    if (!this.canGoBack()) throw new Error("cannot navigate back");
    this.current -= 1;
  }

  forward(): void {
    if (this.current < TOTAL_QUESTIONS) this.current += 1;
  }

  progress(): { answered: number; total: number } {
    return { answered: this.answered.size, total: TOTAL_QUESTIONS };
  }

  surveyComplete(): boolean {
    return this.answered.size === TOTAL_QUESTIONS;
  }

  canTrain(): boolean {
    return this.surveyComplete() && this.status === "untrained";
  }
}
