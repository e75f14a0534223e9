/**
 * Controller: owns the state, performs API calls, re-renders after every
 * transition. The species list for the correction combobox is fetched
 * once, lazily, on the first classification result.
 */

import {
  ApiError,
  classify,
  listSpecies,
  sendFeedback,
  type FetchLike,
  type SpeciesInfo,
} from "./api.js";
import { acceptFile, cameraSupported, capturePhoto, type PickedImage } from "./picker.js";
import * as st from "./state.js";
import { render, type Handlers } from "./ui.js";

export interface AppOptions {
  fetchFn?: FetchLike;
  topK?: number;
}

export class App {
  state: st.ViewState = st.initialState();
  private picked: PickedImage | null = null;
  private species: SpeciesInfo[] = [];
  private readonly fetchFn: FetchLike;
  private readonly topK: number;

  constructor(private root: HTMLElement, options: AppOptions = {}) {
    this.fetchFn =
      options.fetchFn ?? ((input, init) => fetch(input, init));
    this.topK = options.topK ?? 5;
    this.renderNow();
  }

  private handlers(): Handlers {
    return {
      onFilePicked: (file) => this.pickFile(file),
      onCameraCapture: () => void this.captureFromCamera(),
      onClassify: () => void this.classifyPicked(),
      onSelectAlternative: (index) => this.selectAlternative(index),
      onSendFeedback: (name) => void this.submitFeedback(name),
      onReset: () => this.reset(),
    };
  }

  private renderNow(): void {
    render(
      this.root,
      this.state,
      this.species,
      this.handlers(),
      this.picked ? this.picked.previewUrl : null,
      this.picked !== null,
      cameraSupported(),
    );
  }

  private set(state: st.ViewState): void {
    this.state = state;
    this.renderNow();
  }

  pickFile(file: File): void {
    const outcome = acceptFile(file);
    if (typeof outcome === "string") {
      this.picked = null;
      this.set(st.validationError(this.state, outcome));
      return;
    }
    this.picked = outcome;
    this.set(st.reset());
  }

  async captureFromCamera(): Promise<void> {
    try {
      this.picked = await capturePhoto();
      this.set(st.reset());
    } catch (err) {
      this.set(st.validationError(this.state, `camera unavailable: ${String(err)}`));
    }
  }

  async classifyPicked(): Promise<void> {
    if (!this.picked) {
      this.set(st.validationError(this.state, "pick or capture an image first"));
      return;
    }
    this.set(st.startClassify(this.state));
    try {
      const [result] = await Promise.all([
        classify(this.picked.blob, this.topK, this.fetchFn),
        this.ensureSpecies(),
      ]);
      this.set(st.classified(this.state, result));
    } catch (err) {
      const message =
        err instanceof ApiError && err.status === 503
          ? "the model is not loaded yet; try again shortly"
          : String(err instanceof Error ? err.message : err);
      this.set(st.classifyFailed(this.state, message));
    }
  }

  private async ensureSpecies(): Promise<void> {
    if (this.species.length === 0) {
      this.species = await listSpecies(this.fetchFn);
    }
  }

  selectAlternative(index: number): void {
    this.set(st.selectAlternative(this.state, index));
  }

  async submitFeedback(confirmedSpecies: string): Promise<void> {
    if (!this.state.result) return;
    const requestId = this.state.result.request_id;
    this.set(st.feedbackStarted(this.state));
    try {
      await sendFeedback(requestId, confirmedSpecies, this.fetchFn);
      this.set(st.feedbackAccepted(this.state));
    } catch (err) {
      const message =
        err instanceof ApiError && err.status === 422
          ? `the service does not know the species ${confirmedSpecies}`
          : String(err instanceof Error ? err.message : err);
      this.set(st.feedbackRejected(this.state, message));
    }
  }

  reset(): void {
    this.picked = null;
    this.set(st.reset());
  }
}

export function mountApp(root: HTMLElement, options: AppOptions = {}): App {
  return new App(root, options);
}
