/**
 * Grid decoding and client-side rasterization.
 *
 * Raster tiles are rendered straight from the artifact JSON in the local
 * metric frame; no map server involved.
 */

import type { BinaryGridFile, GridMapFile } from "./types.js";

export interface DecodedGrid {
  originX: number;
  originY: number;
  cellSize: number;
  rows: number;
  cols: number;
  /** row-major; NaN marks no-data cells */
  values: Float64Array;
}

export function decodeGridMap(file: GridMapFile): DecodedGrid {
  const values = new Float64Array(file.rows * file.cols);
  for (let i = 0; i < values.length; i++) {
    const v = file.values[i];
    values[i] = v === file.no_data_value ? NaN : v;
  }
  return {
    originX: file.origin_x,
    originY: file.origin_y,
    cellSize: file.cell_size,
    rows: file.rows,
    cols: file.cols,
    values,
  };
}

export function decodeRleRow(runs: number[], cols: number): Uint8Array {
  const row = new Uint8Array(cols);
  let pos = 0;
  let occupied = 0;
  for (const count of runs) {
    if (occupied) row.fill(1, pos, pos + count);
    pos += count;
    occupied ^= 1;
  }
  return row;
}

export function decodeBinaryGrid(file: BinaryGridFile): DecodedGrid {
  const values = new Float64Array(file.rows * file.cols);
  for (let i = 0; i < file.rows; i++) {
    const row = decodeRleRow(file.rle_rows[i], file.cols);
    for (let j = 0; j < file.cols; j++) {
      values[i * file.cols + j] = row[j];
    }
  }
  return {
    originX: file.origin_x,
    originY: file.origin_y,
    cellSize: file.cell_size,
    rows: file.rows,
    cols: file.cols,
    values,
  };
}

export interface ValueRange {
  min: number;
  max: number;
}

export function valueRange(grid: DecodedGrid): ValueRange {
  let min = Infinity;
  let max = -Infinity;
  for (const v of grid.values) {
    if (Number.isNaN(v)) continue;
    if (v < min) min = v;
    if (v > max) max = v;
  }
  if (min > max) return { min: 0, max: 1 };
  return { min, max };
}

export type Rgba = [number, number, number, number];

/** Blue -> green -> yellow -> red dose-style ramp over [0, 1]. */
export function doseRamp(t: number): Rgba {
  const x = Math.min(Math.max(t, 0), 1);
  const stops: [number, Rgba][] = [
    [0.0, [28, 49, 140, 255]],
    [0.35, [29, 150, 108, 255]],
    [0.7, [222, 200, 48, 255]],
    [1.0, [196, 31, 31, 255]],
  ];
  for (let k = 0; k < stops.length - 1; k++) {
    const [t0, c0] = stops[k];
    const [t1, c1] = stops[k + 1];
    if (x <= t1) {
      const f = (x - t0) / (t1 - t0);
      return [
        Math.round(c0[0] + f * (c1[0] - c0[0])),
        Math.round(c0[1] + f * (c1[1] - c0[1])),
        Math.round(c0[2] + f * (c1[2] - c0[2])),
        255,
      ];
    }
  }
  return stops[stops.length - 1][1];
}

export function grayRamp(t: number): Rgba {
  const v = Math.round(Math.min(Math.max(t, 0), 1) * 255);
  return [v, v, v, 255];
}

/**
 * Rasterize a grid into an RGBA buffer (row 0 at the top of the image,
 * i.e. the highest y in the metric frame).  no-data cells are fully
 * transparent.
 */
export function rasterize(
  grid: DecodedGrid,
  ramp: (t: number) => Rgba,
  range?: ValueRange,
  opacity = 1.0,
): Uint8ClampedArray {
  const { rows, cols } = grid;
  const { min, max } = range ?? valueRange(grid);
  const span = max - min || 1;
  const out = new Uint8ClampedArray(rows * cols * 4);
  for (let i = 0; i < rows; i++) {
    const srcRow = rows - 1 - i; // flip: north up
    for (let j = 0; j < cols; j++) {
      const v = grid.values[srcRow * cols + j];
      const k = (i * cols + j) * 4;
      if (Number.isNaN(v)) {
        out[k + 3] = 0;
        continue;
      }
      const [r, g, b, a] = ramp((v - min) / span);
      out[k] = r;
      out[k + 1] = g;
      out[k + 2] = b;
      out[k + 3] = Math.round(a * opacity);
    }
  }
  return out;
}
