/** Typed client for the annotation service HTTP API. */

export interface AnnotationTask {
  task_id: number;
  prompt: string;
  response_a: string;
  response_b: string;
  status: string;
}

export interface PreferenceRecord {
  id: string;
  prompt: string;
  response_a: string;
  response_b: string;
  d: number;
  accept_a: boolean | null;
  accept_b: boolean | null;
  source: string;
  annotator_id: string | null;
  created_at: string;
}

export interface QueueStats {
  open: number;
  done: number;
  by_annotator: Record<string, number>;
}

export type Helpfulness = "a_better" | "b_better" | "both_good" | "both_bad";

export interface JudgmentBody {
  helpfulness: Helpfulness;
  accept_a: boolean | null;
  accept_b: boolean | null;
  annotator_id: string;
  client_token: string;
}

export type SubmitResult =
  | { kind: "ok"; record: PreferenceRecord }
  | { kind: "conflict" }
  | { kind: "rejected"; message: string };

export class ApiClient {
  constructor(readonly baseUrl: string) {}

  /** Oldest open task for this annotator, or null when the queue is empty. */
  async nextTask(annotatorId: string): Promise<AnnotationTask | null> {
    const url = `${this.baseUrl}/tasks/next?annotator=${encodeURIComponent(annotatorId)}`;
    const res = await fetch(url);
    if (res.status === 204) return null;
    if (!res.ok) throw new Error(`next task failed: HTTP ${res.status}`);
    return (await res.json()) as AnnotationTask;
  }

  async submitJudgment(taskId: number, body: JudgmentBody): Promise<SubmitResult> {
    const res = await fetch(`${this.baseUrl}/tasks/${taskId}/judgment`, {
      method: "POST",
      headers: { "Content-Type": "application/json" },
      body: JSON.stringify(body),
    });
    if (res.status === 409) return { kind: "conflict" };
    if (!res.ok) {
      let message = `HTTP ${res.status}`;
      try {
        const parsed = (await res.json()) as { error?: string };
        if (parsed.error) message = parsed.error;
      } catch {
        /* non-JSON error body */
      }
      return { kind: "rejected", message };
    }
    return { kind: "ok", record: (await res.json()) as PreferenceRecord };
  }

  async stats(): Promise<QueueStats> {
    const res = await fetch(`${this.baseUrl}/stats`);
    if (!res.ok) throw new Error(`stats failed: HTTP ${res.status}`);
    return (await res.json()) as QueueStats;
  }
}
