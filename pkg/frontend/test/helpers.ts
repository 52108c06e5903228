/** Test helpers: a ground-truth triplet oracle and a tiny newick parser. */

export type Nested = string | [Nested, Nested];

export function leafPaths(tree: Nested, prefix: number[] = [], out = new Map<string, number[]>()): Map<string, number[]> {
  if (typeof tree === "string") {
    out.set(tree, prefix);
    return out;
  }
  leafPaths(tree[0], [...prefix, 0], out);
  leafPaths(tree[1], [...prefix, 1], out);
  return out;
}

function lcaDepth(a: number[], b: number[]): number {
  let d = 0;
  while (d < a.length && d < b.length && a[d] === b[d]) d++;
  return d;
}

/** The two elements of the triplet with the deepest common ancestor. */
export function truthAnswer(paths: Map<string, number[]>, triplet: string[]): [string, string] {
  const [x, y, z] = triplet;
  const dxy = lcaDepth(paths.get(x)!, paths.get(y)!);
  const dxz = lcaDepth(paths.get(x)!, paths.get(z)!);
  const dyz = lcaDepth(paths.get(y)!, paths.get(z)!);
  if (dxy > dxz && dxy > dyz) return [x, y];
  if (dxz > dxy && dxz > dyz) return [x, z];
  return [y, z];
}

export function parseNewick(text: string): Nested {
  const s = text.trim().replace(/;$/, "");
  let pos = 0;
  const parse = (): Nested => {
    if (s[pos] === "(") {
      pos++;
      const left = parse();
      if (s[pos] !== ",") throw new Error(`expected ',' at ${pos}`);
      pos++;
      const right = parse();
      if (s[pos] !== ")") throw new Error(`expected ')' at ${pos}`);
      pos++;
      return [left, right];
    }
    const m = /^[A-Za-z0-9_.\-]+/.exec(s.slice(pos));
    if (!m) throw new Error(`expected a label at ${pos}`);
    pos += m[0].length;
    return m[0];
  };
  const tree = parse();
  if (pos !== s.length) throw new Error("trailing newick characters");
  return tree;
}

export function canonicalNested(tree: Nested): string {
  if (typeof tree === "string") return tree;
  const kids = [canonicalNested(tree[0]), canonicalNested(tree[1])].sort();
  return `(${kids[0]},${kids[1]})`;
}
