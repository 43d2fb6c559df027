// Scene geometry and drawing. The transform math is pure so hit testing
// and zoom behaviour are unit-testable; actual canvas painting happens
// only in drawScene.

import { AgentView, BBox, GroupView } from "./model.js";
import { Viewport } from "./state.js";

export interface Point {
  x: number;
  y: number;
}

export function worldToScreen(viewport: Viewport, p: Point): Point {
  return {
    x: p.x * viewport.scale + viewport.offsetX,
    y: p.y * viewport.scale + viewport.offsetY,
  };
}

export function screenToWorld(viewport: Viewport, p: Point): Point {
  return {
    x: (p.x - viewport.offsetX) / viewport.scale,
    y: (p.y - viewport.offsetY) / viewport.scale,
  };
}

// Zoom around a screen anchor: the world point under the cursor stays put.
export function zoomAt(viewport: Viewport, anchor: Point, factor: number): Viewport {
  const scale = Math.min(16, Math.max(0.1, viewport.scale * factor));
  const world = screenToWorld(viewport, anchor);
  return {
    scale,
    offsetX: anchor.x - world.x * scale,
    offsetY: anchor.y - world.y * scale,
  };
}

export function pan(viewport: Viewport, dx: number, dy: number): Viewport {
  return { ...viewport, offsetX: viewport.offsetX + dx, offsetY: viewport.offsetY + dy };
}

function contains(bbox: BBox, p: Point): boolean {
  return p.x >= bbox.x_min && p.x <= bbox.x_max && p.y >= bbox.y_min && p.y <= bbox.y_max;
}

function area(bbox: BBox): number {
  return (bbox.x_max - bbox.x_min) * (bbox.y_max - bbox.y_min);
}

// Hit test in world coordinates: zooming and panning never change which
// agent a click lands on. Smallest box wins so nested agents stay
// clickable.
export function hitTest(agents: AgentView[], screen: Point, viewport: Viewport): AgentView | null {
  const world = screenToWorld(viewport, screen);
  let best: AgentView | null = null;
  for (const agent of agents) {
    if (!contains(agent.bbox, world)) continue;
    if (best === null || area(agent.bbox) < area(best.bbox)) best = agent;
  }
  return best;
}

const BOX_COLOURS = { plain: "#00c853", selected: "#ffd600", incomplete: "#ff5252" };

export function drawScene(
  ctx: CanvasRenderingContext2D,
  image: CanvasImageSource | null,
  agents: AgentView[],
  groups: GroupView[],
  selectedUuid: string | null,
  completeness: Map<string, boolean>,
  viewport: Viewport,
): void {
  ctx.save();
  ctx.clearRect(0, 0, ctx.canvas.width, ctx.canvas.height);
  ctx.translate(viewport.offsetX, viewport.offsetY);
  ctx.scale(viewport.scale, viewport.scale);
  if (image !== null) ctx.drawImage(image, 0, 0);
  ctx.lineWidth = 2 / viewport.scale;
  ctx.font = `${13 / viewport.scale}px sans-serif`;
  const groupOf = new Map<number, string>();
  for (const g of groups) for (const m of g.members) groupOf.set(m, g.group_id);
  for (const agent of agents) {
    const { x_min, y_min, x_max, y_max } = agent.bbox;
    const selected = agent.uuid === selectedUuid;
    const complete = completeness.get(agent.uuid) ?? false;
    ctx.strokeStyle = selected
      ? BOX_COLOURS.selected
      : complete ? BOX_COLOURS.plain : BOX_COLOURS.incomplete;
    ctx.strokeRect(x_min, y_min, x_max - x_min, y_max - y_min);
    const badge = groupOf.get(agent.agent_image_id);
    const label = `#${agent.agent_image_id}${badge ? " " + badge : ""}`;
    ctx.fillStyle = "rgba(0,0,0,0.6)";
    const w = ctx.measureText(label).width + 6 / viewport.scale;
    ctx.fillRect(x_min, y_min - 16 / viewport.scale, w, 15 / viewport.scale);
    ctx.fillStyle = "#fff";
    ctx.fillText(label, x_min + 3 / viewport.scale, y_min - 4 / viewport.scale);
  }
  ctx.restore();
}
