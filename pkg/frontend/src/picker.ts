/**
 * Image acquisition: file picker and live camera capture.
 *
 * Both paths yield a Blob plus a preview URL; oversize files are
 * rejected client-side with the same limit the service enforces (413).
 */

import { MAX_UPLOAD_BYTES } from "./api.js";

export interface PickedImage {
  blob: Blob;
  previewUrl: string;
}

export function previewUrlFor(blob: Blob): string {
  // jsdom lacks createObjectURL; an empty preview is fine in tests
  if (typeof URL !== "undefined" && typeof URL.createObjectURL === "function") {
    return URL.createObjectURL(blob);
  }
  return "";
}

/** Validate a picked file; returns an error message instead of a result
 * when the file mirrors a condition the service would reject. */
export function acceptFile(file: File): PickedImage | string {
  if (file.size === 0) {
    return "the selected file is empty";
  }
  if (file.size > MAX_UPLOAD_BYTES) {
    return `image exceeds ${Math.floor(MAX_UPLOAD_BYTES / (1024 * 1024))} MiB`;
  }
  return { blob: file, previewUrl: previewUrlFor(file) };
}

export function cameraSupported(): boolean {
  return (
    typeof navigator !== "undefined" &&
    !!navigator.mediaDevices &&
    typeof navigator.mediaDevices.getUserMedia === "function"
  );
}

/** One-shot camera capture: grab a frame off a video track as a PNG blob. */
export async function capturePhoto(): Promise<PickedImage> {
  const stream = await navigator.mediaDevices.getUserMedia({ video: true });
  try {
    const video = document.createElement("video");
    video.srcObject = stream;
    video.muted = true;
    await video.play();
    const canvas = document.createElement("canvas");
    canvas.width = video.videoWidth || 640;
    canvas.height = video.videoHeight || 480;
    const ctx = canvas.getContext("2d");
    if (!ctx) {
      throw new Error("canvas 2d context unavailable");
    }
    ctx.drawImage(video, 0, 0, canvas.width, canvas.height);
    const blob = await new Promise<Blob>((resolve, reject) => {
      canvas.toBlob(
        (b) => (b ? resolve(b) : reject(new Error("capture failed"))),
        "image/png",
      );
    });
    return { blob, previewUrl: previewUrlFor(blob) };
  } finally {
    for (const track of stream.getTracks()) {
      track.stop();
    }
  }
}
