// Typed client for the wheelpref survey service. Every mutation and read the
// UI performs goes through here; the UI never computes utilities or rankings
// itself.

export interface QuestionPayload {
  question: number;
  design_ids: string[];
  image_uris: string[];
}

export interface RespondentInfo {
  id: string;
  demographics: Record<string, string>;
  responses: number;
  status: "untrained" | "training" | "trained";
  error: string | null;
}

export interface RecommendationItem {
  design_id: string;
  utility: number;
  image_uri: string;
}

export interface RecommendationsPayload {
  respondent: string;
  recommendations: RecommendationItem[];
}

export interface ScatterPoint {
  respondent: string;
  x: number;
  y: number;
  cluster: number;
}

export interface GroupsPayload {
  k: number;
  assignments: Record<string, number>;
  inertia_curve: number[];
  scatter: ScatterPoint[];
}

export interface ServiceStatus {
  designs: number;
  respondents: number;
  responses: number;
  trained: string[];
  training: string[];
  errors: Record<string, string>;
  artifacts: Record<string, boolean>;
}

export class ApiError extends Error {
  constructor(public status: number, public detail: string) {
    super(`HTTP ${status}: ${detail}`);
  }
}

type FetchLike = (input: string, init?: RequestInit) => Promise<Response>;

export class ApiClient {
  constructor(private base: string = "", private fetchFn: FetchLike = fetch) {}

  private async request<T>(method: string, path: string, body?: unknown): Promise<T> {
    const init: RequestInit = { method, headers: {} };
    if (body !== undefined) {
      init.headers = { "Content-Type": "application/json" };
      init.body = JSON.stringify(body);
    }
    const res = await this.fetchFn(this.base + path, init);
    if (!res.ok) {
      let detail = res.statusText;
      try {
        const doc = await res.json();
        if (doc && typeof doc.detail === "string") detail = doc.detail;
      } catch {
        // non-JSON error body; keep the status text
      }
      throw new ApiError(res.status, detail);
    }
    return (await res.json()) as T;
  }

  createRespondent(demographics: Record<string, string> = {}): Promise<{ id: string }> {
    return this.request("POST", "/respondents", { demographics });
  }

  getRespondent(id: string): Promise<RespondentInfo> {
    return this.request("GET", `/respondents/${id}`);
  }

  getQuestion(id: string, question: number): Promise<QuestionPayload> {
    return this.request("GET", `/respondents/${id}/questions/${question}`);
  }

  submitRanking(id: string, question: number, ranking: string[]):
      Promise<{ respondent: string; question: number }> {
    return this.request("POST", `/respondents/${id}/responses`, { question, ranking });
  }

  startTraining(id: string): Promise<{ id: string; status: string }> {
    return this.request("POST", `/respondents/${id}/train`);
  }

  getRecommendations(id: string, n: number): Promise<RecommendationsPayload> {
    return this.request("GET", `/respondents/${id}/recommendations?n=${n}`);
  }

  getGroups(): Promise<GroupsPayload> {
    return this.request("GET", "/groups");
  }

  getStatus(): Promise<ServiceStatus> {
    return this.request("GET", "/status");
  }

  imageUrl(designId: string): string {
    return `${this.base}/designs/${designId}/image?format=png`;
  }
}
