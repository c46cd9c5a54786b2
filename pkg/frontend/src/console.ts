/**
 * Operator console wiring: map canvas, layer toggles, draft tools, and
 * the stage/replan buttons.  All numbers on screen come from service
 * artifacts; this module only fetches, draws, and submits.
 */

import { ApiError, MissionClient, VersionConflictError } from "./api.js";
import { PointsDraft, PolygonDraft } from "./drafts.js";
import { decodeBinaryGrid, decodeGridMap, doseRamp, grayRamp, rasterize } from "./grids.js";
import { LAYER_SOURCE_STAGE, LayerView, type LayerId } from "./layers.js";
import type {
  BinaryGridFile,
  CoverageFile,
  DemFile,
  EstimateFile,
  GridMapFile,
  MissionState,
  Point,
  RoisFile,
  STAGES,
} from "./types.js";

type Tool = "none" | "obstacle" | "unload";

interface ViewTransform {
  scale: number; // pixels per meter
  offsetX: number;
  offsetY: number;
  height: number;
}

export class Console {
  private state: MissionState | null = null;
  private readonly layers = new LayerView();
  private tool: Tool = "none";
  private polygonDraft: PolygonDraft | null = null;
  private pointsDraft: PointsDraft | null = null;
  private view: ViewTransform = { scale: 5, offsetX: 0, offsetY: 0, height: 700 };

  constructor(
    private readonly client: MissionClient,
    private readonly canvas: HTMLCanvasElement,
    private readonly status: HTMLElement,
    private readonly sidebar: HTMLElement,
  ) {
    canvas.addEventListener("click", (ev) => this.onCanvasClick(ev));
  }

  async refresh(): Promise<void> {
    try {
      this.state = await this.client.getState();
      this.status.textContent = `stage ${this.state.stage} (v${this.state.version})` +
        (this.state.stale_stages.length ? `; stale: ${this.state.stale_stages.join(", ")}` : "");
      this.renderSidebar();
      await this.renderLayers();
    } catch (err) {
      // unreachable service: keep whatever is on screen, show the banner
      this.status.textContent = `service unreachable, showing cached view (${String(err)})`;
    }
  }

  setTool(tool: Tool): void {
    this.tool = tool;
    if (!this.state) return;
    if (tool === "obstacle") this.polygonDraft = new PolygonDraft(this.state.version);
    if (tool === "unload") this.pointsDraft = new PointsDraft(this.state.version);
  }

  private toMetric(ev: MouseEvent): Point {
    const rect = this.canvas.getBoundingClientRect();
    const px = ev.clientX - rect.left;
    const py = ev.clientY - rect.top;
    return [
      (px - this.view.offsetX) / this.view.scale,
      (this.view.height - py - this.view.offsetY) / this.view.scale,
    ];
  }

  private onCanvasClick(ev: MouseEvent): void {
    const p = this.toMetric(ev);
    if (this.tool === "obstacle" && this.polygonDraft) {
      this.polygonDraft.addPoint(p);
    } else if (this.tool === "unload" && this.pointsDraft) {
      this.pointsDraft.addPoint(p);
    }
    void this.renderLayers();
  }

  async submitDraft(): Promise<void> {
    if (!this.state) return;
    try {
      if (this.tool === "obstacle" && this.polygonDraft) {
        const payload = this.polygonDraft.toPayload();
        await this.client.submitObstacles(this.polygonDraft.baseVersion, [payload]);
        this.polygonDraft = null;
      } else if (this.tool === "unload" && this.pointsDraft) {
        const v = this.pointsDraft.validity();
        if (!v.valid) throw new Error(v.reasons.join("; "));
        await this.client.submitUnloadPoints(this.pointsDraft.baseVersion, this.pointsDraft.points);
        this.pointsDraft = null;
      }
      await this.refresh();
    } catch (err) {
      if (err instanceof VersionConflictError) {
        this.status.textContent = "someone else changed the mission: reloading, re-apply your draft";
        await this.refresh();
      } else if (err instanceof ApiError) {
        this.status.textContent = `${err.code}: ${err.message}`;
      } else {
        this.status.textContent = String(err);
      }
    }
  }

  async validateObstacles(): Promise<void> {
    if (!this.state) return;
    await this.client.validateObstacles(this.state.version);
    await this.refresh();
  }

  async advance(stage: string): Promise<void> {
    if (!this.state) return;
    try {
      await this.client.advance(stage, this.state.version);
    } catch (err) {
      this.status.textContent = err instanceof ApiError ? `${err.code}: ${err.message}` : String(err);
    }
    await this.refresh();
  }

  private renderSidebar(): void {
    if (!this.state) return;
    const pending = this.state.pending_inputs.length
      ? `<p class="pending">waiting for: ${this.state.pending_inputs.join(", ")}</p>`
      : "";
    const stale = this.state.stale_stages.length
      ? `<p class="stale">replan needed: ${this.state.stale_stages.join(", ")}</p>`
      : "";
    this.sidebar.innerHTML = pending + stale;
  }

  private async renderLayers(): Promise<void> {
    if (!this.state) return;
    const ctx = this.canvas.getContext("2d");
    if (!ctx) return;
    ctx.clearRect(0, 0, this.canvas.width, this.canvas.height);
    for (const setting of this.layers.renderList(this.state.artifacts)) {
      await this.drawLayer(ctx, setting.id, setting.opacity);
    }
    this.drawDrafts(ctx);
  }

  private async drawLayer(ctx: CanvasRenderingContext2D, id: LayerId, opacity: number): Promise<void> {
    const stage = LAYER_SOURCE_STAGE[id];
    switch (id) {
      case "terrain": {
        const dem = await this.client.getArtifact<DemFile>(stage);
        const grid = decodeGridMap({ ...dem, values: dem.heights, no_data_value: NaN });
        this.blit(ctx, grid.originX, grid.originY, grid.cellSize, grid.rows, grid.cols,
          rasterize(grid, grayRamp, undefined, opacity));
        break;
      }
      case "radiation": {
        const file = await this.client.getArtifact<GridMapFile>(stage, "aerial_grid.json");
        const grid = decodeGridMap(file);
        this.blit(ctx, grid.originX, grid.originY, grid.cellSize, grid.rows, grid.cols,
          rasterize(grid, doseRamp, undefined, opacity));
        break;
      }
      case "rois": {
        const rois = await this.client.getArtifact<RoisFile>(stage);
        ctx.strokeStyle = "rgba(230, 90, 20, 0.9)";
        ctx.lineWidth = 2;
        for (const r of rois.rois) this.strokeRing(ctx, r.envelope);
        break;
      }
      case "obstacles": {
        const file = await this.client.getArtifact<BinaryGridFile>(stage, "obstacle_map.json");
        const grid = decodeBinaryGrid(file);
        this.blit(ctx, grid.originX, grid.originY, grid.cellSize, grid.rows, grid.cols,
          rasterize(grid, (t) => [200, 60, 60, t > 0.5 ? 255 : 0], { min: 0, max: 1 }, opacity));
        break;
      }
      case "fused": {
        const file = await this.client.getArtifact<BinaryGridFile>(stage);
        const grid = decodeBinaryGrid(file);
        this.blit(ctx, grid.originX, grid.originY, grid.cellSize, grid.rows, grid.cols,
          rasterize(grid, (t) => [40, 40, 40, t > 0.5 ? 255 : 0], { min: 0, max: 1 }, opacity));
        break;
      }
      case "trajectories": {
        const file = await this.client.getArtifact<CoverageFile>(stage);
        ctx.lineWidth = 1;
        for (const region of file.regions) {
          ctx.strokeStyle = "rgba(30, 110, 220, 0.9)";
          this.strokePolyline(ctx, region.waypoints);
        }
        break;
      }
      case "estimates": {
        const file = await this.client.getArtifact<EstimateFile>(stage, "estimates.json");
        ctx.fillStyle = "rgba(240, 220, 40, 0.95)";
        for (const est of file.estimates) {
          const [px, py] = this.toPixel([est.x, est.y]);
          ctx.beginPath();
          ctx.arc(px, py, 5, 0, 2 * Math.PI);
          ctx.fill();
        }
        break;
      }
    }
  }

  private drawDrafts(ctx: CanvasRenderingContext2D): void {
    if (this.polygonDraft && this.polygonDraft.points.length) {
      ctx.strokeStyle = this.polygonDraft.validity().valid ? "rgba(20,160,20,0.9)" : "rgba(200,30,30,0.9)";
      ctx.lineWidth = 2;
      this.strokeRing(ctx, this.polygonDraft.points);
    }
    if (this.pointsDraft) {
      ctx.fillStyle = "rgba(20,160,20,0.9)";
      for (const p of this.pointsDraft.points) {
        const [px, py] = this.toPixel(p);
        ctx.fillRect(px - 4, py - 4, 8, 8);
      }
    }
  }

  private toPixel([x, y]: Point): Point {
    return [
      x * this.view.scale + this.view.offsetX,
      this.view.height - (y * this.view.scale + this.view.offsetY),
    ];
  }

  private strokeRing(ctx: CanvasRenderingContext2D, ring: Point[]): void {
    if (!ring.length) return;
    this.strokePolyline(ctx, [...ring, ring[0]]);
  }

  private strokePolyline(ctx: CanvasRenderingContext2D, pts: Point[]): void {
    ctx.beginPath();
    pts.forEach((p, k) => {
      const [px, py] = this.toPixel(p);
      if (k === 0) ctx.moveTo(px, py);
      else ctx.lineTo(px, py);
    });
    ctx.stroke();
  }

  private blit(
    ctx: CanvasRenderingContext2D,
    originX: number,
    originY: number,
    cellSize: number,
    rows: number,
    cols: number,
    rgba: Uint8ClampedArray,
  ): void {
    const image = new ImageData(rgba as Uint8ClampedArray<ArrayBuffer>, cols, rows);
    const off = document.createElement("canvas");
    off.width = cols;
    off.height = rows;
    off.getContext("2d")?.putImageData(image, 0, 0);
    const [px, pyTop] = this.toPixel([originX, originY + rows * cellSize]);
    ctx.imageSmoothingEnabled = false;
    ctx.drawImage(off, px, pyTop, cols * cellSize * this.view.scale, rows * cellSize * this.view.scale);
  }
}

export function bootstrap(): void {
  const canvas = document.getElementById("map") as HTMLCanvasElement;
  const status = document.getElementById("status") as HTMLElement;
  const sidebar = document.getElementById("sidebar") as HTMLElement;
  const base = (document.getElementById("server") as HTMLInputElement)?.value ?? "";
  const console_ = new Console(new MissionClient(base), canvas, status, sidebar);
  for (const [id, handler] of [
    ["tool-obstacle", () => console_.setTool("obstacle")],
    ["tool-unload", () => console_.setTool("unload")],
    ["submit-draft", () => void console_.submitDraft()],
    ["validate", () => void console_.validateObstacles()],
    ["refresh", () => void console_.refresh()],
  ] as const) {
    document.getElementById(id)?.addEventListener("click", handler as EventListener);
  }
  document.getElementById("advance")?.addEventListener("click", () => {
    const stage = (document.getElementById("stage-select") as HTMLSelectElement).value;
    void console_.advance(stage);
  });
  void console_.refresh();
}
