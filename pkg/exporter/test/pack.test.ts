import { describe, expect, it } from 'vitest';

import { PackManifest, canonicalManifestBytes, encodePack } from '../src/pack';

function manifest(overrides: Partial<PackManifest> = {}): PackManifest {
  return {
    format_version: 1,
    n_way: 2,
    k_shot: 1,
    n_query: 1,
    m_descriptors: 2,
    c_dim: 3,
    dtype: 'float32',
    sample_ids: ['a/s0.png', 'b/s0.png', 'a/q0.png', 'b/q0.png'],
    labels: [0, 1, 0, 1],
    ...overrides,
  };
}

describe('canonical manifest serialization', () => {
  it('sorts keys recursively and ends with a newline', () => {
    const bytes = canonicalManifestBytes(
      manifest({ provenance: { zulu: 1, alpha: { beta: 2, aardvark: 3 } } }),
    );
    const text = bytes.toString('utf-8');
    expect(text.endsWith('}\n')).toBe(true);
    expect(text.indexOf('"aardvark"')).toBeLessThan(text.indexOf('"beta"'));
    expect(text.indexOf('"c_dim"')).toBeLessThan(text.indexOf('"dtype"'));
    expect(text.indexOf('"alpha"')).toBeLessThan(text.indexOf('"zulu"'));
    // two-space indentation, matching the reader's canonical re-serialization
    expect(text).toContain('\n  "c_dim": 3,');
  });
});

describe('pack encoding', () => {
  it('frames magic, manifest length, manifest, and payload', () => {
    const samples = [0, 1, 2, 3].map((s) => Float32Array.from([s, s, s, s, s, s]));
    const blob = encodePack({ manifest: manifest(), samples });
    expect(blob.subarray(0, 9).toString('ascii')).toBe('WATFPACK\n');
    const rest = blob.subarray(9);
    const newline = rest.indexOf(0x0a);
    const manifestLen = Number(rest.subarray(0, newline).toString('ascii'));
    const payload = rest.subarray(newline + 1 + manifestLen);
    expect(payload.length).toBe(4 * 2 * 3 * 4); // samples * M * C * itemsize
    expect(payload.readFloatLE(0)).toBe(0);
    expect(payload.readFloatLE(6 * 4)).toBe(1);
  });

  it('rejects sample count and length mismatches', () => {
    const good = Float32Array.from([1, 2, 3, 4, 5, 6]);
    expect(() => encodePack({ manifest: manifest(), samples: [good] })).toThrow(/expected 4 samples/);
    const short = [good, good, good, Float32Array.from([1])];
    expect(() => encodePack({ manifest: manifest(), samples: short })).toThrow(/expected 6/);
  });

  it('writes float64 payloads when asked', () => {
    const samples = [0, 1, 2, 3].map(() => Float32Array.from([1, 2, 3, 4, 5, 6]));
    const blob = encodePack({ manifest: manifest({ dtype: 'float64' }), samples });
    const rest = blob.subarray(9);
    const newline = rest.indexOf(0x0a);
    const manifestLen = Number(rest.subarray(0, newline).toString('ascii'));
    expect(rest.length - newline - 1 - manifestLen).toBe(4 * 6 * 8);
  });
});
