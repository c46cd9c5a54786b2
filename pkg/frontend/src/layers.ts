/**
 * The overlay stack of the map view.
 *
 * Layers render bottom-to-top in the fixed default order, matching the
 * time order in which their artifacts appear during a mission: terrain
 * shade, radiation grid, ROI polygons, obstacle map, fused map, planned
 * trajectories, source estimates.
 */

export const DEFAULT_LAYER_ORDER = [
  "terrain",
  "radiation",
  "rois",
  "obstacles",
  "fused",
  "trajectories",
  "estimates",
] as const;

export type LayerId = (typeof DEFAULT_LAYER_ORDER)[number];

/** The mission stage whose artifact feeds each layer. */
export const LAYER_SOURCE_STAGE: Record<LayerId, string> = {
  terrain: "TerrainReady",
  radiation: "RoisDetected",
  rois: "RoisDetected",
  obstacles: "ObstaclesReady",
  fused: "ObstaclesValidated",
  trajectories: "CoveragePlanned",
  estimates: "Localized",
};

export interface LayerSetting {
  id: LayerId;
  visible: boolean;
  opacity: number;
}

export class LayerView {
  private readonly settings = new Map<LayerId, LayerSetting>();

  constructor() {
    for (const id of DEFAULT_LAYER_ORDER) {
      this.settings.set(id, { id, visible: true, opacity: id === "terrain" ? 1.0 : 0.75 });
    }
  }

  setVisible(id: LayerId, visible: boolean): void {
    this.require(id).visible = visible;
  }

  setOpacity(id: LayerId, opacity: number): void {
    if (!(opacity >= 0 && opacity <= 1)) {
      throw new Error("opacity must be in [0, 1]");
    }
    this.require(id).opacity = opacity;
  }

  get(id: LayerId): LayerSetting {
    return { ...this.require(id) };
  }

  /**
   * Layers to draw, bottom-to-top, restricted to those whose source
   * artifacts exist in the given mission artifact listing.
   */
  renderList(artifacts: Record<string, string[]>): LayerSetting[] {
    return DEFAULT_LAYER_ORDER.filter(
      (id) => this.require(id).visible && LAYER_SOURCE_STAGE[id] in artifacts,
    ).map((id) => this.get(id));
  }

  private require(id: LayerId): LayerSetting {
    const s = this.settings.get(id);
    if (!s) throw new Error(`unknown layer: ${id}`);
    return s;
  }
}
