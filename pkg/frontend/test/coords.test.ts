import { describe, expect, it } from "vitest";

import { clientToImage, dragToBox, geometryOf, imageToClient, type CanvasGeometry } from "../src/coords.js";

function geom(scale: number, left = 0, top = 0, imageSize = 64): CanvasGeometry {
  return {
    left,
    top,
    width: imageSize * scale,
    height: imageSize * scale,
    imageWidth: imageSize,
    imageHeight: imageSize,
  };
}

describe("clientToImage / imageToClient", () => {
  it("round-trips every pixel exactly at 2x scale", () => {
    const g = geom(2, 17.5, 3.25);
    for (let y = 0; y < 64; y++) {
      for (let x = 0; x < 64; x++) {
        const client = imageToClient(g, x, y);
        const back = clientToImage(g, client.clientX, client.clientY);
        expect(back).toEqual({ x, y });
      }
    }
  });

  it("round-trips at other scales", () => {
    for (const scale of [1, 1.5, 3]) {
      const g = geom(scale, 10, 20);
      for (const x of [0, 1, 31, 62, 63]) {
        for (const y of [0, 7, 33, 63]) {
          const client = imageToClient(g, x, y);
          expect(clientToImage(g, client.clientX, client.clientY)).toEqual({ x, y });
        }
      }
    }
  });

  it("clamps positions past the canvas edge into bounds", () => {
    const g = geom(2, 10, 10);
    expect(clientToImage(g, 0, 0)).toEqual({ x: 0, y: 0 });
    expect(clientToImage(g, 10 + 128 + 40, 10 + 5)).toEqual({ x: 63, y: 2 });
    expect(clientToImage(g, 10 + 5, 10 + 128)).toEqual({ x: 2, y: 63 });
  });

  it("maps the corner pixels of an unscaled canvas", () => {
    const g = geom(1);
    expect(clientToImage(g, 0, 0)).toEqual({ x: 0, y: 0 });
    expect(clientToImage(g, 63.9, 63.9)).toEqual({ x: 63, y: 63 });
  });
});

describe("dragToBox", () => {
  it("builds an inclusive box from a forward drag", () => {
    const g = geom(2);
    const start = imageToClient(g, 8, 12);
    const end = imageToClient(g, 23, 21);
    expect(dragToBox(g, start, end)).toEqual({ x: 8, y: 12, w: 16, h: 10 });
  });

  it("normalizes a reversed drag to the same box", () => {
    const g = geom(2);
    const start = imageToClient(g, 23, 21);
    const end = imageToClient(g, 8, 12);
    expect(dragToBox(g, start, end)).toEqual({ x: 8, y: 12, w: 16, h: 10 });
  });

  it("treats a zero-length drag as a 1x1 box", () => {
    const g = geom(2);
    const point = imageToClient(g, 40, 5);
    expect(dragToBox(g, point, point)).toEqual({ x: 40, y: 5, w: 1, h: 1 });
  });

  it("clamps a drag that leaves the canvas to the image bounds", () => {
    const g = geom(2, 10, 10);
    const start = imageToClient(g, 50, 50);
    const box = dragToBox(g, start, { clientX: 10 + 128 + 99, clientY: 10 + 128 + 99 });
    expect(box).toEqual({ x: 50, y: 50, w: 14, h: 14 });
    expect(box.x + box.w).toBeLessThanOrEqual(64);
    expect(box.y + box.h).toBeLessThanOrEqual(64);
  });
});

describe("geometryOf", () => {
  it("combines the CSS rect with the backing-store size", () => {
    const canvas = document.createElement("canvas");
    canvas.width = 64;
    canvas.height = 48;
    canvas.getBoundingClientRect = () =>
      ({ left: 5, top: 6, width: 128, height: 96, right: 133, bottom: 102, x: 5, y: 6, toJSON: () => ({}) }) as DOMRect;
    expect(geometryOf(canvas)).toEqual({
      left: 5,
      top: 6,
      width: 128,
      height: 96,
      imageWidth: 64,
      imageHeight: 48,
    });
  });
});
