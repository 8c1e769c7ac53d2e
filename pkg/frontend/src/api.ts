// Typed client for the session service. Every response is JSON; errors
// carry a {"detail": ...} body which becomes ApiError.message.

export interface GoalView {
  intent: string;
  attribute: string;
  adjust_value: number;
  object: string;
}

export interface ActionView {
  kind: string;
  target: string | null;
}

export interface TranscriptEntry {
  role: "user" | "system";
  text: string;
  action?: ActionView;
}

export interface Snapshot {
  id: string;
  policy: string;
  scene_id: string;
  width: number;
  height: number;
  goal: GoalView;
  transcript: TranscriptEntry[];
  image: string;
  overlays: string[];
  turns: number;
  max_turns: number;
  done: boolean;
  success: boolean;
}

export interface EventResult extends Snapshot {
  action: ActionView;
  system_text: string;
}

export interface Meta {
  policies: string[];
  scene_ids: string[];
  iou_threshold: number;
  max_turns: number;
}

export interface CreateRequest {
  policy: string;
  checkpoint?: string;
  scene_id?: string;
  seed?: number;
}

export type UserEvent =
  | { type: "utterance"; text: string }
  | { type: "click"; x: number; y: number }
  | { type: "box"; x: number; y: number; w: number; h: number };

export class ApiError extends Error {
  constructor(readonly status: number, detail: string) {
    super(detail);
    this.name = "ApiError";
  }
}

export class SessionApi {
  constructor(private readonly base: string = "") {}

  private async request<T>(path: string, init?: RequestInit): Promise<T> {
    const response = await fetch(this.base + path, init);
    if (!response.ok) {
      let detail = `${response.status} ${response.statusText}`;
      try {
        const body: unknown = await response.json();
        if (body && typeof body === "object" && typeof (body as { detail?: unknown }).detail === "string") {
          detail = (body as { detail: string }).detail;
        }
      } catch {
        // non-JSON error body; keep the status line
      }
      throw new ApiError(response.status, detail);
    }
    return (await response.json()) as T;
  }

  private post<T>(path: string, body: unknown): Promise<T> {
    return this.request<T>(path, {
      method: "POST",
      headers: { "Content-Type": "application/json" },
      body: JSON.stringify(body),
    });
  }

  meta(): Promise<Meta> {
    return this.request<Meta>("/meta");
  }

  createSession(body: CreateRequest): Promise<Snapshot> {
    return this.post<Snapshot>("/sessions", body);
  }

  getSession(id: string): Promise<Snapshot> {
    return this.request<Snapshot>(`/sessions/${id}`);
  }

  sendEvent(id: string, event: UserEvent): Promise<EventResult> {
    return this.post<EventResult>(`/sessions/${id}/event`, event);
  }

  deleteSession(id: string): Promise<{ deleted: string }> {
    return this.request<{ deleted: string }>(`/sessions/${id}`, { method: "DELETE" });
  }
}
