import * as fs from 'fs';
import * as path from 'path';

import { PNG } from 'pngjs';

import { SplitMix64 } from '../src/prng';

/** Write a deterministic noise PNG. */
export function writeNoisePng(file: string, size: number, rng: SplitMix64): void {
  const png = new PNG({ width: size, height: size });
  for (let i = 0; i < size * size; i++) {
    png.data[i * 4] = rng.nextInt(256);
    png.data[i * 4 + 1] = rng.nextInt(256);
    png.data[i * 4 + 2] = rng.nextInt(256);
    png.data[i * 4 + 3] = 255;
  }
  fs.writeFileSync(file, PNG.sync.write(png));
}

/** Class-per-directory dataset of seeded noise PNGs. */
export function buildDataset(root: string, classes: string[], imagesPerClass: number, size = 24): void {
  const rng = new SplitMix64(1234);
  for (const cls of classes) {
    const dir = path.join(root, cls);
    fs.mkdirSync(dir, { recursive: true });
    for (let i = 0; i < imagesPerClass; i++) {
      writeNoisePng(path.join(dir, `img_${String(i).padStart(3, '0')}.png`), size, rng);
    }
  }
}
