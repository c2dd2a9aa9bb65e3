/**
 * Episode export: sample images, run the backbone, write packs.
 *
 * Feature maps [h, w, c] are flattened row-major into M = h*w local
 * descriptors of dimension c, exactly as the backbone produced them -
 * no normalization, centering, or any other post-processing.
 */
import * as fs from 'fs';
import * as path from 'path';

import * as tf from '@tensorflow/tfjs';

import { Backbone } from './backbone';
import {
  DatasetIndex,
  EpisodeComposition,
  EpisodeShape,
  SampledImage,
  assertSufficientImages,
  sampleEpisode,
  scanDataset,
} from './dataset';
import { UnreadableImageError, loadImage } from './image';
import { PackDtype, writePack } from './pack';

export interface ExportSpec extends EpisodeShape {
  dataRoot: string;
  backboneId: string;
  imageSize: number;
  episodes: number;
  seed: number;
  outDir: string;
  dtype: PackDtype;
  onUnreadable: 'abort' | 'skip';
}

export interface ExportResult {
  packPaths: string[];
  compositionPath: string;
  grid: [number, number];
  cDim: number;
}

interface FeatureResult {
  values: Float32Array;
  grid: [number, number];
  cDim: number;
}

function extractDescriptors(backbone: Backbone, file: string, size: number): FeatureResult {
  const image = loadImage(file, size);
  try {
    const features = backbone.extract(image);
    const [h, w, c] = features.shape;
    const values = features.dataSync() as Float32Array; // row-major (h, w, c) = (M, C)
    features.dispose();
    return { values: Float32Array.from(values), grid: [h, w], cDim: c };
  } finally {
    image.dispose();
  }
}

function resolveImage(
  spec: ExportSpec,
  backbone: Backbone,
  composition: EpisodeComposition,
  image: SampledImage,
): { image: SampledImage; features: FeatureResult } {
  let candidate = image;
  for (;;) {
    try {
      const file = path.join(spec.dataRoot, candidate.relPath);
      return { image: candidate, features: extractDescriptors(backbone, file, spec.imageSize) };
    } catch (err) {
      if (!(err instanceof UnreadableImageError) || spec.onUnreadable === 'abort') {
        throw err;
      }
      const spares = composition.spares.get(candidate.classIndex) ?? [];
      const replacement = spares.shift();
      if (!replacement) {
        throw new Error(
          `class ${candidate.className} ran out of readable images while replacing ${candidate.relPath}`,
        );
      }
      console.error(`skip unreadable ${candidate.relPath}, substituting ${replacement.relPath}`);
      candidate = replacement;
    }
  }
}

export async function exportPacks(spec: ExportSpec, backbone: Backbone): Promise<ExportResult> {
  if (spec.nWay < 2) {
    throw new Error(`n_way must be >= 2, got ${spec.nWay}`);
  }
  if (spec.kShot < 1 || spec.nQuery < 1 || spec.episodes < 1) {
    throw new Error('k_shot, n_query, and episodes must all be >= 1');
  }
  await tf.ready();
  const index: DatasetIndex = scanDataset(spec.dataRoot);
  assertSufficientImages(index, spec);
  fs.mkdirSync(spec.outDir, { recursive: true });

  const packPaths: string[] = [];
  const compositions: object[] = [];
  let grid: [number, number] | undefined;
  let cDim: number | undefined;

  for (let episodeIndex = 0; episodeIndex < spec.episodes; episodeIndex++) {
    const composition = sampleEpisode(index, spec, spec.seed, episodeIndex);
    const resolved = [...composition.support, ...composition.query].map((image) =>
      resolveImage(spec, backbone, composition, image),
    );
    const first = resolved[0].features;
    grid = grid ?? first.grid;
    cDim = cDim ?? first.cDim;
    for (const { features } of resolved) {
      if (features.grid[0] !== grid[0] || features.grid[1] !== grid[1] || features.cDim !== cDim) {
        throw new Error('backbone produced inconsistent feature-map shapes across images');
      }
    }
    const manifest = {
      format_version: 1,
      n_way: spec.nWay,
      k_shot: spec.kShot,
      n_query: spec.nQuery,
      m_descriptors: grid[0] * grid[1],
      c_dim: cDim,
      dtype: spec.dtype,
      sample_ids: resolved.map((r) => r.image.relPath),
      labels: resolved.map((r) => r.image.classIndex),
      provenance: {
        source: 'watf-exporter',
        backbone: backbone.name,
        dataset: path.basename(path.resolve(spec.dataRoot)),
        image_size: spec.imageSize,
        grid: [grid[0], grid[1]],
      },
    };
    const file = path.join(spec.outDir, `episode_${String(episodeIndex).padStart(6, '0')}.pack`);
    writePack({ manifest, samples: resolved.map((r) => r.features.values) }, file);
    packPaths.push(file);
    compositions.push({
      episode: episodeIndex,
      class_names: composition.classNames,
      support: resolved.slice(0, spec.nWay * spec.kShot).map((r) => r.image.relPath),
      query: resolved.slice(spec.nWay * spec.kShot).map((r) => r.image.relPath),
    });
    console.error(
      `episode ${episodeIndex}: classes [${composition.classNames.join(', ')}] -> ${path.basename(file)}`,
    );
  }

  const compositionPath = path.join(spec.outDir, 'composition.json');
  const compositionDoc = {
    data_root: path.resolve(spec.dataRoot),
    backbone: backbone.name,
    image_size: spec.imageSize,
    n_way: spec.nWay,
    k_shot: spec.kShot,
    n_query: spec.nQuery,
    episodes: spec.episodes,
    seed: spec.seed,
    compositions,
  };
  fs.writeFileSync(compositionPath, JSON.stringify(compositionDoc, null, 2) + '\n');
  return { packPaths, compositionPath, grid: grid!, cDim: cDim! };
}
