/** Gesture -> API dispatch with a single in-flight mutation per session. */

import { ApiClient, ApiError, CreateSessionRequest, MutationResponse, SessionView } from './api.js';
import { initialState, UiState } from './state.js';

export type Gesture =
  | { kind: 'produce-suite'; guidance?: string }
  | { kind: 'explain-test'; testId: string }
  | { kind: 'regenerate-test'; testId: string; guidance?: string }
  | { kind: 'delete-test'; testId: string }
  | { kind: 'edit-test'; testId: string; body: string }
  | { kind: 'generate-function' }
  | { kind: 'generate-function-with-advice' }
  | { kind: 'request-advice' };

export type StateListener = (state: UiState) => void;

export class WorkbenchController {
  readonly state: UiState = initialState();
  private listeners: StateListener[] = [];

  constructor(private readonly api: ApiClient) {}

  onChange(listener: StateListener): void {
    this.listeners.push(listener);
  }

  private emit(): void {
    for (const listener of this.listeners) {
      listener(this.state);
    }
  }

  private setView(view: SessionView): void {
    this.state.view = view;
    this.emit();
  }

  get sessionId(): string {
    if (this.state.view === null) {
      throw new Error('no session');
    }
    return this.state.view.session_id;
  }

  async createSession(request: CreateSessionRequest): Promise<SessionView> {
    const view = await this.api.createSession(request);
    this.state.error = null;
    this.setView(view);
    return view;
  }

  /** Pull server truth; cheap enough to poll at 1 Hz. */
  async refresh(): Promise<void> {
    if (this.state.view === null || this.state.pending) {
      return;
    }
    this.setView(await this.api.getSession(this.sessionId));
  }

  /**
   * Exactly one API request per accepted gesture; refused while a mutation
   * is in flight (client-side double-click suppression on top of the
   * server's debounce). Returns false when the gesture was not dispatched.
   */
  async dispatch(gesture: Gesture): Promise<boolean> {
    if (this.state.view === null || this.state.pending) {
      return false;
    }
    this.state.pending = true;
    this.state.error = null;
    this.emit();
    try {
      const response = await this.send(gesture);
      if (gesture.kind === 'explain-test' && response.text !== undefined) {
        this.state.explanation = response.text;
      }
      this.state.view = response.view;
      return true;
    } catch (error) {
      if (error instanceof ApiError) {
        this.state.error = `${error.errorType}: ${error.message}`;
      } else {
        this.state.error = String(error);
      }
      return false;
    } finally {
      this.state.pending = false;
      this.emit();
    }
  }

  private send(gesture: Gesture): Promise<MutationResponse> {
    const id = this.sessionId;
    switch (gesture.kind) {
      case 'produce-suite':
        return this.api.produceSuite(id, gesture.guidance);
      case 'explain-test':
        return this.api.explainTest(id, gesture.testId);
      case 'regenerate-test':
        return this.api.regenerateTest(id, gesture.testId, gesture.guidance);
      case 'delete-test':
        return this.api.deleteTest(id, gesture.testId);
      case 'edit-test':
        return this.api.editTest(id, gesture.testId, gesture.body);
      case 'generate-function':
        return this.api.generateFunction(id, false);
      case 'generate-function-with-advice':
        return this.api.generateFunction(id, true);
      case 'request-advice':
        return this.api.requestAdvice(id);
    }
  }

  /** Fire the function_viewed telemetry event (panel focus). */
  async reportFunctionViewed(): Promise<void> {
    if (this.state.view === null) {
      return;
    }
    try {
      const response = await this.api.reportFunctionViewed(this.sessionId);
      this.setView(response.view);
    } catch {
      // View events are best-effort; terminal sessions reject them.
    }
  }
}
