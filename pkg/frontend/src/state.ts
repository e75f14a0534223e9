/**
 * View state machine: idle -> classifying -> result -> feedback-sent.
 *
 * Pure transition functions over an immutable state object; the
 * controller owns dispatching and re-rendering. Feedback can only be
 * sent from the result phase, and only one classify request may be in
 * flight at a time - both enforced here, not in the UI layer.
 */

import type { ClassificationResult } from "./api.js";

export type Phase = "idle" | "classifying" | "result" | "feedback-sent";

export interface ViewState {
  phase: Phase;
  result: ClassificationResult | null;
  selectedIndex: number;
  feedbackPending: boolean;
  error: string | null;
}

export function initialState(): ViewState {
  return {
    phase: "idle",
    result: null,
    selectedIndex: 0,
    feedbackPending: false,
    error: null,
  };
}

export function startClassify(state: ViewState): ViewState {
  if (state.phase === "classifying") {
    throw new Error("a classification request is already in flight");
  }
  return { ...initialState(), phase: "classifying" };
}

/** Defensive re-sort: alternatives must render in non-increasing probability
 * even if the service ever returned them unordered. */
export function classified(
  state: ViewState,
  result: ClassificationResult,
): ViewState {
  if (state.phase !== "classifying") {
    throw new Error(`classified() is invalid in phase ${state.phase}`);
  }
  const sorted = {
    ...result,
    results: [...result.results].sort((a, b) => b.probability - a.probability),
  };
  return {
    phase: "result",
    result: sorted,
    selectedIndex: 0,
    feedbackPending: false,
    error: null,
  };
}

export function classifyFailed(state: ViewState, message: string): ViewState {
  if (state.phase !== "classifying") {
    throw new Error(`classifyFailed() is invalid in phase ${state.phase}`);
  }
  return { ...initialState(), error: message };
}

export function selectAlternative(state: ViewState, index: number): ViewState {
  if (state.phase !== "result" || !state.result) {
    throw new Error("alternatives only exist in the result phase");
  }
  if (index < 0 || index >= state.result.results.length) {
    throw new Error(`alternative index ${index} out of range`);
  }
  return { ...state, selectedIndex: index, error: null };
}

export function feedbackStarted(state: ViewState): ViewState {
  if (state.phase !== "result") {
    throw new Error("feedback can only be sent from the result phase");
  }
  if (state.feedbackPending) {
    throw new Error("feedback is already pending");
  }
  return { ...state, feedbackPending: true, error: null };
}

export function feedbackAccepted(state: ViewState): ViewState {
  if (state.phase !== "result" || !state.feedbackPending) {
    throw new Error("no pending feedback to accept");
  }
  return { ...state, phase: "feedback-sent", feedbackPending: false };
}

export function feedbackRejected(state: ViewState, message: string): ViewState {
  if (state.phase !== "result" || !state.feedbackPending) {
    throw new Error("no pending feedback to reject");
  }
  return { ...state, feedbackPending: false, error: message };
}

export function reset(): ViewState {
  return initialState();
}

export function validationError(state: ViewState, message: string): ViewState {
  return { ...state, error: message };
}
