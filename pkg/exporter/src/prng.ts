/**
 * SplitMix64: the seeded random source for episode sampling and random
 * backbone weights. 64-bit state, documented constants, identical output
 * on every platform. Floats are the top 53 bits of each word.
 */

const MASK = (1n << 64n) - 1n;
const GOLDEN = 0x9e3779b97f4a7c15n;

export class SplitMix64 {
  private state: bigint;

  constructor(seed: bigint | number) {
    this.state = BigInt(seed) & MASK;
  }

  /** Derive an independent child stream, e.g. one per episode index. */
  child(index: number): SplitMix64 {
    const child = new SplitMix64(this.state);
    child.state = (child.state + BigInt(index + 1) * GOLDEN) & MASK;
    child.nextUint64();
    return child;
  }

  nextUint64(): bigint {
    this.state = (this.state + GOLDEN) & MASK;
    let z = this.state;
    z = ((z ^ (z >> 30n)) * 0xbf58476d1ce4e5b9n) & MASK;
    z = ((z ^ (z >> 27n)) * 0x94d049bb133111ebn) & MASK;
    return (z ^ (z >> 31n)) & MASK;
  }

  /** Uniform float in [0, 1): (word >> 11) * 2^-53. */
  nextFloat(): number {
    return Number(this.nextUint64() >> 11n) / 2 ** 53;
  }

  /** Integer in [0, n) as floor(uniform * n). */
  nextInt(n: number): number {
    if (n < 1) throw new Error(`nextInt needs n >= 1, got ${n}`);
    return Math.floor(this.nextFloat() * n);
  }

  /** In-place Fisher-Yates shuffle. */
  shuffle<T>(items: T[]): T[] {
    for (let i = items.length - 1; i > 0; i--) {
      const j = this.nextInt(i + 1);
      [items[i], items[j]] = [items[j], items[i]];
    }
    return items;
  }

  /** Uniform float in [-limit, limit], for weight initialization. */
  nextSymmetric(limit: number): number {
    return (2 * this.nextFloat() - 1) * limit;
  }
}
