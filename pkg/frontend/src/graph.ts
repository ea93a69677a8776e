/** Delegation-graph view model: node colors by run state and a layered
 * top-down tree layout sized for the SVG panel. */

import type { ClientSnapshot } from "./fold.js";
import type { RunStateName } from "./types.js";

export const STATE_COLORS: Record<RunStateName, string> = {
  RUNNING: "#34a853",
  WAITING: "#f4b400",
  DONE: "#9aa0a6",
  ERRORED: "#ea4335",
};

export function statusColor(state: RunStateName): string {
  return STATE_COLORS[state] ?? STATE_COLORS.ERRORED;
}

export interface GraphNode {
  id: string;
  label: string;
  color: string;
  state: RunStateName;
  depth: number;
  /** Layout coordinates in abstract units; the renderer scales them. */
  x: number;
  y: number;
  selected: boolean;
}

export interface GraphEdge {
  from: string;
  to: string;
}

export interface GraphViewModel {
  nodes: GraphNode[];
  edges: GraphEdge[];
  selected: string | null;
  /** Width and height of the layout in abstract units. */
  width: number;
  height: number;
}

interface LayoutNode {
  id: string;
  children: string[];
  depth: number;
  x: number;
}

/** Assign x by centering each parent over its subtree; leaves take
 * consecutive slots left to right. Returns total leaf count. */
function placeSubtree(
  id: string,
  nodes: Map<string, LayoutNode>,
  nextLeaf: { value: number },
): number {
  const node = nodes.get(id)!;
  const placed = node.children.filter((c) => nodes.has(c));
  if (placed.length === 0) {
    node.x = nextLeaf.value;
    nextLeaf.value += 1;
    return 1;
  }
  let leaves = 0;
  for (const child of placed) leaves += placeSubtree(child, nodes, nextLeaf);
  const xs = placed.map((c) => nodes.get(c)!.x);
  node.x = (Math.min(...xs) + Math.max(...xs)) / 2;
  return leaves;
}

/** Build the render-ready graph for a snapshot. Agents whose parents are
 * missing from the snapshot are laid out as extra roots so a truncated
 * stream still draws. */
export function buildGraph(
  snap: ClientSnapshot,
  selected: string | null = null,
): GraphViewModel {
  const layout = new Map<string, LayoutNode>();
  for (const node of snap.agents.values()) {
    layout.set(node.id, {
      id: node.id,
      children: node.children,
      depth: node.depth,
      x: 0,
    });
  }
  const roots = [...snap.agents.values()]
    .filter((n) => n.parent === null || !snap.agents.has(n.parent))
    .map((n) => n.id);
  const nextLeaf = { value: 0 };
  for (const root of roots) placeSubtree(root, layout, nextLeaf);

  const nodes: GraphNode[] = [];
  const edges: GraphEdge[] = [];
  let maxDepth = 0;
  for (const agent of snap.agents.values()) {
    const slot = layout.get(agent.id)!;
    maxDepth = Math.max(maxDepth, agent.depth);
    nodes.push({
      id: agent.id,
      label: agent.id.slice(0, 8),
      color: statusColor(agent.state),
      state: agent.state,
      depth: agent.depth,
      x: slot.x,
      y: agent.depth,
      selected: agent.id === selected,
    });
    for (const child of agent.children) {
      if (snap.agents.has(child)) edges.push({ from: agent.id, to: child });
    }
  }
  return {
    nodes,
    edges,
    selected,
    width: Math.max(1, nextLeaf.value),
    height: maxDepth + 1,
  };
}
