/**
 * Class-per-directory dataset scanning and seeded episode sampling.
 *
 * The dataset root holds one subdirectory per class; every readable `.png`
 * inside is a candidate image. Sampling is fully determined by the seed:
 * class choice, image choice, and order all come from one SplitMix64
 * stream per episode, so the same (root, spec, seed) always yields the
 * same composition.
 */
import * as fs from 'fs';
import * as path from 'path';

import { SplitMix64 } from './prng';

export interface EpisodeShape {
  nWay: number;
  kShot: number;
  nQuery: number;
}

export interface SampledImage {
  classIndex: number;
  className: string;
  /** Path relative to the dataset root; doubles as the pack sample id. */
  relPath: string;
}

export interface EpisodeComposition {
  episodeIndex: number;
  classNames: string[];
  support: SampledImage[];
  query: SampledImage[];
  /** Unused images per class, in draw order, for unreadable-image replacement. */
  spares: Map<number, SampledImage[]>;
}

export interface DatasetIndex {
  root: string;
  classes: { name: string; files: string[] }[];
}

export function scanDataset(root: string): DatasetIndex {
  const entries = fs
    .readdirSync(root, { withFileTypes: true })
    .filter((e) => e.isDirectory())
    .map((e) => e.name)
    .sort();
  if (entries.length === 0) {
    throw new Error(`dataset root ${root} has no class directories`);
  }
  const classes = entries.map((name) => ({
    name,
    files: fs
      .readdirSync(path.join(root, name))
      .filter((f) => f.toLowerCase().endsWith('.png'))
      .sort(),
  }));
  return { root, classes };
}

export function assertSufficientImages(index: DatasetIndex, shape: EpisodeShape): void {
  const needed = shape.kShot + shape.nQuery;
  const short = index.classes.filter((c) => c.files.length < needed);
  if (short.length > 0) {
    const detail = short.map((c) => `${c.name} (${c.files.length})`).join(', ');
    throw new Error(`every class needs >= k_shot + n_query = ${needed} images; too few in: ${detail}`);
  }
  if (index.classes.length < shape.nWay) {
    throw new Error(`dataset has ${index.classes.length} classes, fewer than n_way=${shape.nWay}`);
  }
}

export function sampleEpisode(
  index: DatasetIndex,
  shape: EpisodeShape,
  seed: number,
  episodeIndex: number,
): EpisodeComposition {
  const rng = new SplitMix64(seed).child(episodeIndex);
  const classOrder = rng.shuffle([...index.classes.keys()]);
  const picked = classOrder.slice(0, shape.nWay);

  const support: SampledImage[] = [];
  const query: SampledImage[] = [];
  const spares = new Map<number, SampledImage[]>();
  const classNames: string[] = [];
  picked.forEach((datasetClass, classIndex) => {
    const cls = index.classes[datasetClass];
    classNames.push(cls.name);
    const order = rng.shuffle([...cls.files]);
    const asImage = (file: string): SampledImage => ({
      classIndex,
      className: cls.name,
      relPath: path.join(cls.name, file),
    });
    support.push(...order.slice(0, shape.kShot).map(asImage));
    query.push(...order.slice(shape.kShot, shape.kShot + shape.nQuery).map(asImage));
    spares.set(classIndex, order.slice(shape.kShot + shape.nQuery).map(asImage));
  });
  return { episodeIndex, classNames, support, query, spares };
}
