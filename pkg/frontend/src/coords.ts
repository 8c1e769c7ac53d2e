// Mapping between page (client) coordinates and image pixel coordinates.
// The canvas backing store is the native scene size; CSS may scale it,
// so every gesture has to be converted before it reaches the service.

export interface CanvasGeometry {
  left: number;
  top: number;
  width: number;
  height: number;
  imageWidth: number;
  imageHeight: number;
}

export interface PixelPoint {
  x: number;
  y: number;
}

export interface ClientPoint {
  clientX: number;
  clientY: number;
}

export interface PixelBox {
  x: number;
  y: number;
  w: number;
  h: number;
}

export function geometryOf(canvas: HTMLCanvasElement): CanvasGeometry {
  const rect = canvas.getBoundingClientRect();
  return {
    left: rect.left,
    top: rect.top,
    width: rect.width,
    height: rect.height,
    imageWidth: canvas.width,
    imageHeight: canvas.height,
  };
}

function clamp(value: number, lo: number, hi: number): number {
  return Math.min(hi, Math.max(lo, value));
}

// Pixel that contains the pointer position. Floor after scaling so the
// mapping is exact at integer zoom factors; clamp so gestures that start
// on the canvas but drift past its edge still land in bounds.
export function clientToImage(geom: CanvasGeometry, clientX: number, clientY: number): PixelPoint {
  const x = Math.floor(((clientX - geom.left) / geom.width) * geom.imageWidth);
  const y = Math.floor(((clientY - geom.top) / geom.height) * geom.imageHeight);
  return {
    x: clamp(x, 0, geom.imageWidth - 1),
    y: clamp(y, 0, geom.imageHeight - 1),
  };
}

// Client position of a pixel's center. Using the center (not the corner)
// makes clientToImage(imageToClient(p)) the identity at any scale.
export function imageToClient(geom: CanvasGeometry, x: number, y: number): ClientPoint {
  return {
    clientX: geom.left + ((x + 0.5) / geom.imageWidth) * geom.width,
    clientY: geom.top + ((y + 0.5) / geom.imageHeight) * geom.height,
  };
}

// Normalize a drag to a min-corner box with inclusive extent, so dragging
// in any direction (or a zero-length drag) yields a valid 1x1-or-larger
// box fully inside the image.
export function dragToBox(geom: CanvasGeometry, start: ClientPoint, end: ClientPoint): PixelBox {
  const a = clientToImage(geom, start.clientX, start.clientY);
  const b = clientToImage(geom, end.clientX, end.clientY);
  const x = Math.min(a.x, b.x);
  const y = Math.min(a.y, b.y);
  return {
    x,
    y,
    w: Math.abs(a.x - b.x) + 1,
    h: Math.abs(a.y - b.y) + 1,
  };
}
