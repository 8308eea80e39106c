// Layered left-to-right graph layout. Pure: DAG doc in, node coordinates out.

export interface LayoutNode {
  taskId: string;
  layer: number;
  row: number;
  x: number;
  y: number;
}

export interface GraphLayout {
  nodes: Map<string, LayoutNode>;
  width: number;
  height: number;
  nodeWidth: number;
  nodeHeight: number;
}

const NODE_W = 148;
const NODE_H = 44;
const GAP_X = 64;
const GAP_Y = 26;
const PAD = 24;

/**
 * Longest-path layering: a node sits one column right of its furthest
 * upstream. Rows within a column are ordered by task id so the picture is
 * stable across refreshes.
 */
export function layoutGraph(taskIds: string[], edges: [string, string][]): GraphLayout {
  const upstream = new Map<string, string[]>(taskIds.map((t) => [t, []]));
  for (const [from, to] of edges) {
    if (!upstream.has(from) || !upstream.has(to)) {
      throw new Error(`edge ${from}->${to} references an unknown task`);
    }
    upstream.get(to)!.push(from);
  }

  const layers = new Map<string, number>();
  const visiting = new Set<string>();
  const layerOf = (task: string): number => {
    const known = layers.get(task);
    if (known !== undefined) return known;
    if (visiting.has(task)) throw new Error(`cycle through ${task}`);
    visiting.add(task);
    const ups = upstream.get(task)!;
    const layer = ups.length === 0 ? 0 : 1 + Math.max(...ups.map(layerOf));
    visiting.delete(task);
    layers.set(task, layer);
    return layer;
  };
  taskIds.forEach(layerOf);

  const byLayer = new Map<number, string[]>();
  for (const task of taskIds) {
    const layer = layers.get(task)!;
    if (!byLayer.has(layer)) byLayer.set(layer, []);
    byLayer.get(layer)!.push(task);
  }
  const nodes = new Map<string, LayoutNode>();
  let maxRows = 1;
  for (const [layer, members] of byLayer) {
    members.sort();
    maxRows = Math.max(maxRows, members.length);
    members.forEach((taskId, row) => {
      nodes.set(taskId, {
        taskId,
        layer,
        row,
        x: PAD + layer * (NODE_W + GAP_X),
        y: PAD + row * (NODE_H + GAP_Y),
      });
    });
  }
  const layerCount = byLayer.size === 0 ? 1 : Math.max(...byLayer.keys()) + 1;
  return {
    nodes,
    width: PAD * 2 + layerCount * NODE_W + (layerCount - 1) * GAP_X,
    height: PAD * 2 + maxRows * NODE_H + (maxRows - 1) * GAP_Y,
    nodeWidth: NODE_W,
    nodeHeight: NODE_H,
  };
}
