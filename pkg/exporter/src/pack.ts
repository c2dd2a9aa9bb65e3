/**
 * Episode-pack writer, byte-compatible with the watf reader:
 *
 *   WATFPACK\n
 *   <manifest byte length>\n
 *   <canonical JSON manifest (recursively sorted keys, 2-space indent, trailing newline)>
 *   <little-endian IEEE-754 payload [n_samples, M, C], support first
 *    (class-major, shot-minor), then queries (class-major)>
 */
import * as fs from 'fs';

const MAGIC = 'WATFPACK\n';
const FORMAT_VERSION = 1;

export type PackDtype = 'float32' | 'float64';

export interface PackManifest {
  format_version: number;
  n_way: number;
  k_shot: number;
  n_query: number;
  m_descriptors: number;
  c_dim: number;
  dtype: PackDtype;
  sample_ids: string[];
  labels: number[];
  provenance?: Record<string, unknown>;
}

function sortKeysDeep(value: unknown): unknown {
  if (Array.isArray(value)) {
    return value.map(sortKeysDeep);
  }
  if (value !== null && typeof value === 'object') {
    const out: Record<string, unknown> = {};
    for (const key of Object.keys(value as Record<string, unknown>).sort()) {
      out[key] = sortKeysDeep((value as Record<string, unknown>)[key]);
    }
    return out;
  }
  return value;
}

export function canonicalManifestBytes(manifest: PackManifest): Buffer {
  return Buffer.from(JSON.stringify(sortKeysDeep(manifest), null, 2) + '\n', 'utf-8');
}

export interface EpisodeTensor {
  manifest: PackManifest;
  /** One Float32Array per sample in manifest order, each of length M*C, row-major. */
  samples: Float32Array[];
}

export function encodePack(episode: EpisodeTensor): Buffer {
  const { manifest, samples } = episode;
  const nSamples = manifest.n_way * manifest.k_shot + manifest.n_way * manifest.n_query;
  if (samples.length !== nSamples) {
    throw new Error(`expected ${nSamples} samples, got ${samples.length}`);
  }
  const valuesPerSample = manifest.m_descriptors * manifest.c_dim;
  const itemSize = manifest.dtype === 'float32' ? 4 : 8;
  const payload = Buffer.alloc(nSamples * valuesPerSample * itemSize);
  samples.forEach((sample, index) => {
    if (sample.length !== valuesPerSample) {
      throw new Error(`sample ${index} has ${sample.length} values, expected ${valuesPerSample}`);
    }
    let offset = index * valuesPerSample * itemSize;
    for (let i = 0; i < sample.length; i++) {
      if (manifest.dtype === 'float32') {
        payload.writeFloatLE(sample[i], offset);
      } else {
        payload.writeDoubleLE(sample[i], offset);
      }
      offset += itemSize;
    }
  });
  const manifestBytes = canonicalManifestBytes(manifest);
  const header = Buffer.from(MAGIC + `${manifestBytes.length}\n`, 'ascii');
  return Buffer.concat([header, manifestBytes, payload]);
}

export function writePack(episode: EpisodeTensor, file: string): number {
  const blob = encodePack(episode);
  fs.writeFileSync(file, blob);
  return blob.length;
}
