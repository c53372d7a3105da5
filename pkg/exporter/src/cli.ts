/** CLI: `hypercut-export export --image in.ppm --out out.sghn [--model NAME]`. */

import { exportFeatures } from "./index.js";

function usage(): string {
  return "usage: hypercut-export export --image PATH --out PATH " +
    "[--model NAME] [--weights PATH] [--seed N]";
}

export function main(argv: string[]): number {
  if (argv[0] !== "export") {
    process.stderr.write(usage() + "\n");
    return 2;
  }
  const options: Record<string, string> = {};
  for (let i = 1; i < argv.length; i += 2) {
    const flag = argv[i];
    const value = argv[i + 1];
    if (!flag.startsWith("--") || value === undefined) {
      process.stderr.write(usage() + "\n");
      return 2;
    }
    options[flag.slice(2)] = value;
  }
  const known = new Set(["image", "out", "model", "weights", "seed"]);
  for (const key of Object.keys(options)) {
    if (!known.has(key)) {
      process.stderr.write(`unknown flag --${key}\n${usage()}\n`);
      return 2;
    }
  }
  if (!options.image || !options.out) {
    process.stderr.write(usage() + "\n");
    return 2;
  }
  try {
    const data = exportFeatures({
      imagePath: options.image,
      outPath: options.out,
      model: options.model,
      weightsPath: options.weights,
      seed: options.seed === undefined ? 0 : Number(options.seed),
    });
    process.stdout.write(
      `${options.out}: grid ${data.gridH}x${data.gridW}, d=${data.channels}, ` +
      `p=${data.patchSize}\n`);
    return 0;
  } catch (err) {
    process.stderr.write(`hypercut-export: error: ${(err as Error).message}\n`);
    return 1;
  }
}

const entry = process.argv[1] ?? "";
if (entry.endsWith("cli.js") || entry.endsWith("cli.ts")) {
  process.exit(main(process.argv.slice(2)));
}
