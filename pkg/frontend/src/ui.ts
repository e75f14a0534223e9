/**
 * DOM rendering for each view phase. Render functions are passive:
 * they build elements and attach the handlers the controller passes in.
 */

import type { ResultEntry, SpeciesInfo } from "./api.js";
import type { ViewState } from "./state.js";

export interface Handlers {
  onFilePicked(file: File): void;
  onCameraCapture(): void;
  onClassify(): void;
  onSelectAlternative(index: number): void;
  onSendFeedback(confirmedSpecies: string): void;
  onReset(): void;
}

export function formatPercent(p: number): string {
  return `${(p * 100).toFixed(1)}%`;
}

function el<K extends keyof HTMLElementTagNameMap>(
  tag: K,
  attrs: Record<string, string> = {},
  ...children: (Node | string)[]
): HTMLElementTagNameMap[K] {
  const node = document.createElement(tag);
  for (const [key, value] of Object.entries(attrs)) {
    node.setAttribute(key, value);
  }
  node.append(...children);
  return node;
}

function errorBanner(message: string | null): HTMLElement | null {
  if (!message) return null;
  return el("p", { class: "error", "data-testid": "error" }, message);
}

function renderIdle(
  state: ViewState,
  handlers: Handlers,
  previewUrl: string | null,
  hasImage: boolean,
  cameraAvailable: boolean,
): HTMLElement {
  const input = el("input", {
    type: "file",
    accept: "image/png,image/jpeg",
    "data-testid": "file-input",
  });
  input.addEventListener("change", () => {
    const file = input.files && input.files[0];
    if (file) handlers.onFilePicked(file);
  });

  const classify = el(
    "button",
    { "data-testid": "classify-button" },
    "Classify",
  ) as HTMLButtonElement;
  classify.disabled = !hasImage;
  classify.addEventListener("click", () => handlers.onClassify());

  const children: (Node | string)[] = [
    el("h1", {}, "What species is this?"),
    el("p", {}, "Pick a photo or capture one, then classify it."),
    input,
  ];
  if (cameraAvailable) {
    const camera = el("button", { "data-testid": "camera-button" }, "Use camera");
    camera.addEventListener("click", () => handlers.onCameraCapture());
    children.push(camera);
  }
  if (previewUrl !== null) {
    children.push(
      el("img", {
        src: previewUrl,
        alt: "selected image preview",
        class: "preview",
        "data-testid": "preview",
      }),
    );
  }
  children.push(classify);
  const banner = errorBanner(state.error);
  if (banner) children.push(banner);
  return el("section", { class: "panel" }, ...children);
}

function typeBadge(species: SpeciesInfo | null): HTMLElement {
  const type = species ? species.type : "exotic";
  return el("span", { class: `badge badge-${type}`, "data-testid": "type-badge" }, type);
}

function speciesCard(entry: ResultEntry, thumbnail: string): HTMLElement {
  const s = entry.species;
  const name = entry.scientific_name;
  const images = el(
    "div",
    { class: "compare" },
    el("figure", {},
      el("img", {
        src: s && s.image ? s.image : "",
        alt: `reference image of ${name}`,
        class: "reference",
      }),
      el("figcaption", {}, "Reference"),
    ),
    el("figure", {},
      el("img", {
        src: thumbnail,
        alt: "your capture",
        class: "thumbnail",
        "data-testid": "capture-thumbnail",
      }),
      el("figcaption", {}, "Your photo"),
    ),
  );
  return el(
    "article",
    { class: "card", "data-testid": "species-card" },
    el("h2", { "data-testid": "card-name" }, name),
    el("p", { class: "common-names", "data-testid": "card-common-names" },
      s ? s.common_names.join(", ") : ""),
    el("p", {},
      typeBadge(s),
      " ",
      el("span", { "data-testid": "card-probability" }, formatPercent(entry.probability)),
    ),
    images,
    el("dl", {},
      el("dt", {}, "Conservation status"),
      el("dd", { "data-testid": "card-status" }, s ? s.conservation_status : "unknown"),
      el("dt", {}, "Distribution"),
      el("dd", {}, s ? s.distribution : "unknown"),
      el("dt", {}, "Description"),
      el("dd", {}, s ? s.description : ""),
    ),
  );
}

function alternativesList(
  entries: ResultEntry[],
  selectedIndex: number,
  handlers: Handlers,
): HTMLElement {
  const list = el("ol", { class: "alternatives", "data-testid": "alternatives" });
  entries.forEach((entry, index) => {
    if (index === selectedIndex) return;
    const pick = el(
      "button",
      { class: "alt", "data-testid": `alternative-${index}` },
      `${entry.scientific_name} (${formatPercent(entry.probability)})`,
    );
    pick.addEventListener("click", () => handlers.onSelectAlternative(index));
    list.append(el("li", {}, pick));
  });
  return list;
}

function feedbackControls(
  state: ViewState,
  species: SpeciesInfo[],
  handlers: Handlers,
): HTMLElement {
  const current = state.result!.results[state.selectedIndex]!;
  const combo = el("select", { "data-testid": "species-combobox" }) as HTMLSelectElement;
  for (const rec of species) {
    combo.append(el("option", { value: rec.scientific_name }, rec.scientific_name));
  }
  combo.value = current.scientific_name;

  const send = el(
    "button",
    { "data-testid": "feedback-button" },
    "Confirm species",
  ) as HTMLButtonElement;
  send.disabled = state.feedbackPending;
  send.addEventListener("click", () => handlers.onSendFeedback(combo.value));

  return el(
    "div",
    { class: "feedback" },
    el("label", {}, "Correct species: ", combo),
    send,
  );
}

function renderResult(
  state: ViewState,
  species: SpeciesInfo[],
  handlers: Handlers,
): HTMLElement {
  const result = state.result!;
  const selected = result.results[state.selectedIndex]!;
  const children: (Node | string)[] = [
    speciesCard(selected, result.thumbnail),
    el("h3", {}, "Other possibilities"),
    alternativesList(result.results, state.selectedIndex, handlers),
    feedbackControls(state, species, handlers),
  ];
  const banner = errorBanner(state.error);
  if (banner) children.push(banner);
  const again = el("button", { "data-testid": "reset-button" }, "Classify another");
  again.addEventListener("click", () => handlers.onReset());
  children.push(again);
  return el("section", { class: "panel" }, ...children);
}

function renderFeedbackSent(handlers: Handlers): HTMLElement {
  const again = el("button", { "data-testid": "reset-button" }, "Classify another");
  again.addEventListener("click", () => handlers.onReset());
  return el(
    "section",
    { class: "panel" },
    el("p", { "data-testid": "acknowledgment" },
      "Thanks, your confirmation was recorded."),
    again,
  );
}

export function render(
  root: HTMLElement,
  state: ViewState,
  species: SpeciesInfo[],
  handlers: Handlers,
  previewUrl: string | null,
  hasImage: boolean,
  cameraAvailable: boolean,
): void {
  root.replaceChildren();
  switch (state.phase) {
    case "idle":
      root.append(renderIdle(state, handlers, previewUrl, hasImage, cameraAvailable));
      break;
    case "classifying":
      root.append(
        el("section", { class: "panel" },
          el("p", { "data-testid": "classifying" }, "Classifying…")),
      );
      break;
    case "result":
      root.append(renderResult(state, species, handlers));
      break;
    case "feedback-sent":
      root.append(renderFeedbackSent(handlers));
      break;
  }
}
