/** PNG decoding into input tensors for the backbone. */
import * as fs from 'fs';

import * as tf from '@tensorflow/tfjs';
import { PNG } from 'pngjs';

export class UnreadableImageError extends Error {
  constructor(
    public readonly file: string,
    cause: string,
  ) {
    super(`unreadable image ${file}: ${cause}`);
  }
}

/**
 * Decode a PNG into a [size, size, 3] float tensor in [0, 1], bilinearly
 * resized to the requested input resolution.
 */
export function loadImage(file: string, size: number): tf.Tensor3D {
  let png: PNG;
  try {
    png = PNG.sync.read(fs.readFileSync(file));
  } catch (err) {
    throw new UnreadableImageError(file, err instanceof Error ? err.message : String(err));
  }
  const { width, height, data } = png; // RGBA bytes
  const rgb = new Float32Array(width * height * 3);
  for (let i = 0; i < width * height; i++) {
    rgb[i * 3] = data[i * 4] / 255;
    rgb[i * 3 + 1] = data[i * 4 + 1] / 255;
    rgb[i * 3 + 2] = data[i * 4 + 2] / 255;
  }
  return tf.tidy(() => {
    const image = tf.tensor3d(rgb, [height, width, 3]);
    if (height === size && width === size) {
      return image;
    }
    return tf.image.resizeBilinear(image, [size, size]);
  });
}
