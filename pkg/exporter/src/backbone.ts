/**
 * Pluggable convolutional backbones.
 *
 * A backbone maps a [size, size, 3] input image to a spatial feature map
 * [h, w, c] with the pooling/classification head removed; the exporter
 * flattens that map into h*w local descriptors of dimension c and never
 * post-processes them.
 *
 * Two identifiers are understood:
 *   - `conv4-random:<seed>` - a four-block conv net (3x3 conv + relu, with
 *     2x2 max-pooling after the first two blocks) whose weights are drawn
 *     deterministically from the seed. No training involved; useful as a
 *     fixed random feature extractor and for offline testing.
 *   - `tfjs:<dir>` - a Keras-format tfjs LayersModel (model.json + weight
 *     shards, the standard model-zoo layout) loaded from disk and truncated
 *     after its last 4-D (spatial) layer.
 */
import * as fs from 'fs';
import * as path from 'path';

import * as tf from '@tensorflow/tfjs';

import { SplitMix64 } from './prng';

export interface Backbone {
  readonly name: string;
  /** [size, size, 3] image -> [h, w, c] feature map. */
  extract(image: tf.Tensor3D): tf.Tensor3D;
}

const CONV4_CHANNELS = [32, 64, 64, 64];

class RandomConv4 implements Backbone {
  readonly name: string;
  private readonly kernels: tf.Tensor4D[] = [];
  private readonly biases: tf.Tensor1D[] = [];

  constructor(seed: number) {
    this.name = `conv4-random:${seed}`;
    const rng = new SplitMix64(seed);
    let inChannels = 3;
    for (const outChannels of CONV4_CHANNELS) {
      const fanIn = 3 * 3 * inChannels;
      const fanOut = 3 * 3 * outChannels;
      const limit = Math.sqrt(6 / (fanIn + fanOut));
      const values = new Float32Array(3 * 3 * inChannels * outChannels);
      for (let i = 0; i < values.length; i++) {
        values[i] = rng.nextSymmetric(limit);
      }
      this.kernels.push(tf.tensor4d(values, [3, 3, inChannels, outChannels]));
      this.biases.push(tf.zeros([outChannels]));
      inChannels = outChannels;
    }
  }

  extract(image: tf.Tensor3D): tf.Tensor3D {
    return tf.tidy(() => {
      let x = image.expandDims(0) as tf.Tensor4D;
      for (let block = 0; block < this.kernels.length; block++) {
        x = tf.conv2d(x, this.kernels[block], 1, 'same');
        x = tf.add(x, this.biases[block]);
        x = tf.relu(x);
        if (block < 2) {
          x = tf.maxPool(x, 2, 2, 'same');
        }
      }
      return x.squeeze([0]) as tf.Tensor3D;
    });
  }
}

/** Minimal disk IOHandler pair for the standard model.json + shard layout. */
export function diskSaveHandler(dir: string): tf.io.IOHandler {
  return {
    async save(artifacts: tf.io.ModelArtifacts): Promise<tf.io.SaveResult> {
      fs.mkdirSync(dir, { recursive: true });
      const weightsManifest = [
        { paths: ['weights.bin'], weights: artifacts.weightSpecs ?? [] },
      ];
      const modelJson = {
        modelTopology: artifacts.modelTopology,
        format: artifacts.format,
        generatedBy: artifacts.generatedBy,
        convertedBy: artifacts.convertedBy ?? null,
        weightsManifest,
      };
      fs.writeFileSync(path.join(dir, 'model.json'), JSON.stringify(modelJson));
      const data = artifacts.weightData as ArrayBuffer;
      fs.writeFileSync(path.join(dir, 'weights.bin'), Buffer.from(data));
      return {
        modelArtifactsInfo: {
          dateSaved: new Date(),
          modelTopologyType: 'JSON',
        },
      };
    },
  };
}

function diskLoadHandler(dir: string): tf.io.IOHandler {
  return {
    async load(): Promise<tf.io.ModelArtifacts> {
      const modelJson = JSON.parse(fs.readFileSync(path.join(dir, 'model.json'), 'utf-8'));
      const specs: tf.io.WeightsManifestEntry[] = [];
      const buffers: Buffer[] = [];
      for (const group of modelJson.weightsManifest) {
        specs.push(...group.weights);
        for (const shard of group.paths) {
          buffers.push(fs.readFileSync(path.join(dir, shard)));
        }
      }
      const data = Buffer.concat(buffers);
      return {
        modelTopology: modelJson.modelTopology,
        format: modelJson.format,
        generatedBy: modelJson.generatedBy,
        weightSpecs: specs,
        weightData: data.buffer.slice(data.byteOffset, data.byteOffset + data.byteLength),
      };
    },
  };
}

class TfjsLayersBackbone implements Backbone {
  readonly name: string;
  private constructor(
    name: string,
    private readonly model: tf.LayersModel,
  ) {
    this.name = name;
  }

  static async load(dir: string): Promise<TfjsLayersBackbone> {
    const full = await tf.loadLayersModel(diskLoadHandler(dir));
    // strip the head: keep everything up to the last spatial (4-D) layer
    let spatial: tf.layers.Layer | undefined;
    for (const layer of full.layers) {
      const shape = layer.outputShape;
      if (Array.isArray(shape) && !Array.isArray(shape[0]) && shape.length === 4) {
        spatial = layer;
      }
    }
    if (!spatial) {
      throw new Error(`model in ${dir} has no 4-D feature map layer to export from`);
    }
    const truncated = tf.model({
      inputs: full.inputs,
      outputs: spatial.output as tf.SymbolicTensor,
    });
    return new TfjsLayersBackbone(`tfjs:${path.basename(dir)}`, truncated);
  }

  extract(image: tf.Tensor3D): tf.Tensor3D {
    return tf.tidy(() => {
      const out = this.model.predict(image.expandDims(0)) as tf.Tensor4D;
      return out.squeeze([0]) as tf.Tensor3D;
    });
  }
}

export async function loadBackbone(identifier: string): Promise<Backbone> {
  if (identifier.startsWith('conv4-random:')) {
    const seed = Number(identifier.slice('conv4-random:'.length));
    if (!Number.isInteger(seed) || seed < 0) {
      throw new Error(`bad conv4-random seed in ${identifier}`);
    }
    return new RandomConv4(seed);
  }
  if (identifier.startsWith('tfjs:')) {
    return TfjsLayersBackbone.load(identifier.slice('tfjs:'.length));
  }
  throw new Error(`unknown backbone ${identifier}; expected conv4-random:<seed> or tfjs:<dir>`);
}
