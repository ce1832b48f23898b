/** Typed client for the workbench service (v1 JSON contract). */

export interface TestCaseView {
  test_id: string;
  name: string;
  body: string;
  origin: string;
}

export interface SuiteView {
  version: number;
  tests: TestCaseView[];
}

export interface PerTestView {
  test_id: string;
  name: string;
  outcome: string;
  message: string | null;
}

export interface ReportView {
  pass_count: number;
  total_count: number;
  coverage: number | null;
  all_pass: boolean;
  suite_version: number;
  function_version: number;
  per_test: PerTestView[];
}

export interface FunctionView {
  version: number;
  source: string;
}

export interface SessionView {
  session_id: string;
  participant_id: string;
  task_id: string;
  phase: string;
  outcome: string;
  remaining_budget_seconds: number;
  budget_seconds: number;
  spec_document: string;
  function_name: string;
  suite: SuiteView | null;
  function: FunctionView | null;
  report: ReportView | null;
  advice: string | null;
  event_seq: number;
  dropped_events: number;
}

export interface MutationResponse {
  debounced: boolean;
  view: SessionView;
  text?: string;
}

export class ApiError extends Error {
  constructor(
    readonly status: number,
    readonly errorType: string,
    detail: string,
  ) {
    super(detail);
  }
}

async function parseOrThrow<T>(response: Response): Promise<T> {
  const body = await response.json().catch(() => ({}));
  if (!response.ok) {
    throw new ApiError(response.status, body.error ?? 'HttpError', body.detail ?? response.statusText);
  }
  return body as T;
}

export interface CreateSessionRequest {
  participant_id: string;
  task_id?: string;
  task?: 'evaluation' | 'warmup';
  session_id?: string;
  budget_seconds?: number;
}

export class ApiClient {
  constructor(readonly baseUrl: string) {}

  private async post<T>(path: string, body?: unknown): Promise<T> {
    const response = await fetch(`${this.baseUrl}${path}`, {
      method: 'POST',
      headers: { 'Content-Type': 'application/json' },
      body: JSON.stringify(body ?? {}),
    });
    return parseOrThrow<T>(response);
  }

  async createSession(request: CreateSessionRequest): Promise<SessionView> {
    const body = await this.post<{ view: SessionView }>('/sessions', request);
    return body.view;
  }

  async getSession(sessionId: string): Promise<SessionView> {
    const response = await fetch(`${this.baseUrl}/sessions/${sessionId}`);
    const body = await parseOrThrow<{ view: SessionView }>(response);
    return body.view;
  }

  produceSuite(sessionId: string, guidance?: string): Promise<MutationResponse> {
    return this.post(`/sessions/${sessionId}/suite`, guidance ? { guidance } : {});
  }

  explainTest(sessionId: string, testId: string): Promise<MutationResponse> {
    return this.post(`/sessions/${sessionId}/tests/${testId}/explain`);
  }

  regenerateTest(sessionId: string, testId: string, guidance?: string): Promise<MutationResponse> {
    return this.post(`/sessions/${sessionId}/tests/${testId}/regenerate`, guidance ? { guidance } : {});
  }

  deleteTest(sessionId: string, testId: string): Promise<MutationResponse> {
    return this.post(`/sessions/${sessionId}/tests/${testId}/delete`);
  }

  async editTest(sessionId: string, testId: string, body: string): Promise<MutationResponse> {
    const response = await fetch(`${this.baseUrl}/sessions/${sessionId}/tests/${testId}`, {
      method: 'PUT',
      headers: { 'Content-Type': 'application/json' },
      body: JSON.stringify({ body }),
    });
    return parseOrThrow<MutationResponse>(response);
  }

  generateFunction(sessionId: string, useAdvice: boolean): Promise<MutationResponse> {
    return this.post(`/sessions/${sessionId}/function`, { use_advice: useAdvice });
  }

  requestAdvice(sessionId: string): Promise<MutationResponse> {
    return this.post(`/sessions/${sessionId}/advice`);
  }

  reportFunctionViewed(sessionId: string): Promise<{ accepted: boolean; view: SessionView }> {
    return this.post(`/sessions/${sessionId}/events/view`);
  }

  closeSession(sessionId: string): Promise<{ phase: string; view: SessionView }> {
    return this.post(`/sessions/${sessionId}/close`);
  }

  async exportSession(sessionId: string): Promise<{ bundle_dir: string }> {
    const response = await fetch(`${this.baseUrl}/sessions/${sessionId}/export`);
    return parseOrThrow(response);
  }
}
