/**
 * Color mapping for the explorer. Pure functions of the wire bytes, so the
 * painted colors are exactly reproducible from a response body.
 */

export interface Rgb {
  r: number;
  g: number;
  b: number;
}

/**
 * Heatmap palette for u8 similarity scores: 0 is blue (low match), the
 * midpoint is green, 255 is yellow (best match).
 */
export function scoreToColor(score: number): Rgb {
  const t = Math.min(Math.max(score, 0), 255) / 255;
  if (t <= 0.5) {
    const k = t * 2;
    return { r: 0, g: Math.round(255 * k), b: Math.round(255 * (1 - k)) };
  }
  const k = (t - 0.5) * 2;
  return { r: Math.round(255 * k), g: 255, b: 0 };
}

/** Sentinel in the segmentation wire format for unlabeled points. */
export const UNLABELED_U16 = 0xffff;

const UNLABELED_COLOR: Rgb = { r: 64, g: 64, b: 64 };

/**
 * Deterministic categorical palette keyed by label index: evenly spaced
 * hues at full saturation, stable across sessions.
 */
export function labelToColor(label: number): Rgb {
  if (label === UNLABELED_U16) {
    return UNLABELED_COLOR;
  }
  const hue = (label * 137.50776405003785) % 360; // golden-angle spacing
  return hslToRgb(hue, 0.75, 0.55);
}

function hslToRgb(h: number, s: number, l: number): Rgb {
  const c = (1 - Math.abs(2 * l - 1)) * s;
  const hp = h / 60;
  const x = c * (1 - Math.abs((hp % 2) - 1));
  let rgb: [number, number, number];
  if (hp < 1) rgb = [c, x, 0];
  else if (hp < 2) rgb = [x, c, 0];
  else if (hp < 3) rgb = [0, c, x];
  else if (hp < 4) rgb = [0, x, c];
  else if (hp < 5) rgb = [x, 0, c];
  else rgb = [c, 0, x];
  const m = l - c / 2;
  return {
    r: Math.round(255 * (rgb[0] + m)),
    g: Math.round(255 * (rgb[1] + m)),
    b: Math.round(255 * (rgb[2] + m)),
  };
}

/** Expand u8 scores into a flat RGB float array for the point renderer. */
export function scoresToColorBuffer(scores: Uint8Array): Float32Array {
  const out = new Float32Array(scores.length * 3);
  for (let i = 0; i < scores.length; i++) {
    const c = scoreToColor(scores[i] ?? 0);
    out[i * 3] = c.r / 255;
    out[i * 3 + 1] = c.g / 255;
    out[i * 3 + 2] = c.b / 255;
  }
  return out;
}

/** Expand u16 labels into a flat RGB float array for the point renderer. */
export function labelsToColorBuffer(labels: Uint16Array): Float32Array {
  const out = new Float32Array(labels.length * 3);
  for (let i = 0; i < labels.length; i++) {
    const c = labelToColor(labels[i] ?? UNLABELED_U16);
    out[i * 3] = c.r / 255;
    out[i * 3 + 1] = c.g / 255;
    out[i * 3 + 2] = c.b / 255;
  }
  return out;
}
