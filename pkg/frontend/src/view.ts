// Pure-ish rendering helpers: each takes an element plus data and redraws
// it from scratch. State lives in app.ts; nothing here keeps any.

import type { GoalView, Snapshot, TranscriptEntry } from "./api.js";

export type GestureMode = "none" | "click" | "box";

export interface ViewState {
  snapshot: Snapshot | null;
  mode: GestureMode;
  busy: boolean;
}

export function describeGoal(goal: GoalView): string {
  const sign = goal.adjust_value > 0 ? "+" : "";
  return (
    `intent=${goal.intent}, attribute=${goal.attribute}, ` +
    `adjust_value=${sign}${goal.adjust_value}, object=${goal.object}`
  );
}

export function renderTranscript(list: HTMLElement, entries: TranscriptEntry[]): void {
  list.innerHTML = "";
  for (const entry of entries) {
    const item = document.createElement("li");
    item.className = `turn ${entry.role}`;
    item.textContent = entry.text;
    list.appendChild(item);
  }
  list.scrollTop = list.scrollHeight;
}

export function renderBanner(el: HTMLElement, snapshot: Snapshot | null): void {
  if (!snapshot || !snapshot.done) {
    el.hidden = true;
    el.textContent = "";
    el.className = "banner";
    return;
  }
  el.hidden = false;
  if (snapshot.success) {
    el.textContent = "Success: the committed edit matches the goal.";
    el.className = "banner success";
  } else {
    el.textContent = "Failure: the session ended without the goal edit.";
    el.className = "banner failure";
  }
}

let toastTimer: ReturnType<typeof setTimeout> | undefined;

export function showToast(el: HTMLElement, message: string): void {
  el.textContent = message;
  el.hidden = false;
  if (toastTimer !== undefined) clearTimeout(toastTimer);
  toastTimer = setTimeout(() => {
    el.hidden = true;
  }, 6000);
}

// Masks come back as grayscale PNGs (white = in-region); tint them into a
// translucent highlight so candidates read against the scene.
function drawOverlay(ctx: CanvasRenderingContext2D, maskB64: string, w: number, h: number): void {
  const img = new Image();
  img.onload = () => {
    const off = document.createElement("canvas");
    off.width = w;
    off.height = h;
    const octx = off.getContext("2d");
    if (!octx) return;
    octx.drawImage(img, 0, 0);
    const data = octx.getImageData(0, 0, w, h);
    const px = data.data;
    for (let i = 0; i < px.length; i += 4) {
      const inRegion = px[i] > 127;
      px[i] = 255;
      px[i + 1] = 200;
      px[i + 2] = 40;
      px[i + 3] = inRegion ? 110 : 0;
    }
    octx.putImageData(data, 0, 0);
    ctx.drawImage(off, 0, 0);
  };
  img.src = `data:image/png;base64,${maskB64}`;
}

// Backing store stays at native scene size; CSS scales the element. The
// 2d context is missing under jsdom, so bail out quietly there.
export function drawScene(canvas: HTMLCanvasElement, snapshot: Snapshot): void {
  canvas.width = snapshot.width;
  canvas.height = snapshot.height;
  const ctx = canvas.getContext("2d");
  if (!ctx) return;
  const img = new Image();
  img.onload = () => {
    ctx.drawImage(img, 0, 0);
    for (const overlay of snapshot.overlays) {
      drawOverlay(ctx, overlay, snapshot.width, snapshot.height);
    }
  };
  img.src = `data:image/png;base64,${snapshot.image}`;
}
