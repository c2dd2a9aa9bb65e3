#!/usr/bin/env node
/** Command line for exporting backbone feature maps as watf episode packs. */
import yargs from 'yargs';
import { hideBin } from 'yargs/helpers';

import { loadBackbone } from './backbone';
import { ExportSpec, exportPacks } from './export';

export async function main(argv: string[]): Promise<number> {
  const args = await yargs(argv)
    .scriptName('watf-export')
    .usage('$0 --data-root <dir> --backbone conv4-random:7 --out <dir> [options]')
    .option('data-root', { type: 'string', demandOption: true, describe: 'class-per-directory image dataset' })
    .option('backbone', { type: 'string', default: 'conv4-random:0', describe: 'conv4-random:<seed> or tfjs:<dir>' })
    .option('image-size', { type: 'number', default: 84, describe: 'input resolution fed to the backbone' })
    .option('n-way', { type: 'number', default: 5 })
    .option('k-shot', { type: 'number', default: 1 })
    .option('n-query', { type: 'number', default: 15 })
    .option('episodes', { type: 'number', default: 600 })
    .option('seed', { type: 'number', default: 0 })
    .option('dtype', { choices: ['float32', 'float64'] as const, default: 'float32' as const })
    .option('on-unreadable', { choices: ['abort', 'skip'] as const, default: 'abort' as const })
    .option('out', { type: 'string', demandOption: true, describe: 'output directory for packs' })
    .strict()
    .fail((msg, err) => {
      throw err ?? new Error(msg);
    })
    .parse();

  const spec: ExportSpec = {
    dataRoot: args['data-root'],
    backboneId: args.backbone,
    imageSize: args['image-size'],
    nWay: args['n-way'],
    kShot: args['k-shot'],
    nQuery: args['n-query'],
    episodes: args.episodes,
    seed: args.seed,
    outDir: args.out,
    dtype: args.dtype,
    onUnreadable: args['on-unreadable'],
  };
  const backbone = await loadBackbone(spec.backboneId);
  const result = await exportPacks(spec, backbone);
  console.log(
    `wrote ${result.packPaths.length} packs (grid ${result.grid[0]}x${result.grid[1]}, ` +
      `C=${result.cDim}) to ${spec.outDir}`,
  );
  return 0;
}

if (require.main === module) {
  main(hideBin(process.argv))
    .then((code) => process.exit(code))
    .catch((err) => {
      console.error(`error: ${err instanceof Error ? err.message : err}`);
      process.exit(1);
    });
}
