/**
 * Typed client for the classification service HTTP API.
 *
 * The only mutating call the UI ever makes is POST /api/feedback;
 * classification is a stateless query and species listing is read-only.
 */

export const MAX_UPLOAD_BYTES = 10 * 1024 * 1024;

export type SpeciesType = "native" | "endemic" | "exotic";

export interface SpeciesInfo {
  scientific_name: string;
  common_names: string[];
  type: SpeciesType;
  conservation_status: string;
  distribution: string;
  description: string;
  image: string;
}

export interface ResultEntry {
  scientific_name: string;
  probability: number;
  species: SpeciesInfo | null;
}

export interface ClassificationResult {
  request_id: string;
  model: string;
  thumbnail: string;
  results: ResultEntry[];
}

export class ApiError extends Error {
  constructor(public status: number, message: string) {
    super(message);
    this.name = "ApiError";
  }
}

export type FetchLike = (input: string, init?: RequestInit) => Promise<Response>;

async function errorMessage(response: Response): Promise<string> {
  try {
    const body = await response.json();
    if (body && typeof body.error === "string") return body.error;
  } catch {
    /* non-JSON error body */
  }
  return `request failed with status ${response.status}`;
}

export async function classify(
  image: Blob,
  k: number,
  fetchFn: FetchLike,
): Promise<ClassificationResult> {
  const form = new FormData();
  form.append("image", image, "capture.png");
  const response = await fetchFn(`/api/classify?k=${k}`, {
    method: "POST",
    body: form,
  });
  if (!response.ok) {
    throw new ApiError(response.status, await errorMessage(response));
  }
  return (await response.json()) as ClassificationResult;
}

export async function listSpecies(fetchFn: FetchLike): Promise<SpeciesInfo[]> {
  const response = await fetchFn("/api/species");
  if (!response.ok) {
    throw new ApiError(response.status, await errorMessage(response));
  }
  return (await response.json()) as SpeciesInfo[];
}

export async function sendFeedback(
  requestId: string,
  confirmedSpecies: string,
  fetchFn: FetchLike,
): Promise<void> {
  const response = await fetchFn("/api/feedback", {
    method: "POST",
    headers: { "Content-Type": "application/json" },
    body: JSON.stringify({
      request_id: requestId,
      confirmed_species: confirmedSpecies,
    }),
  });
  if (!response.ok) {
    throw new ApiError(response.status, await errorMessage(response));
  }
}
