/**
 * Wire formats of the mission HTTP API (mirrors the service's JSON).
 * The console performs no planning math: everything rendered comes from
 * these payloads.
 */

export interface MissionState {
  stage: string;
  version: number;
  artifacts: Record<string, string[]>;
  pending_inputs: string[];
  stale_stages: string[];
  operator_inputs: Record<string, boolean>;
}

export interface ApiErrorBody {
  code: string;
  message: string;
}

export type Point = [number, number];

export interface PolygonPayload {
  envelope: Point[];
  holes: Point[][];
}

/** JSON header + row-major values with a no-data sentinel. */
export interface GridMapFile {
  origin_x: number;
  origin_y: number;
  cell_size: number;
  rows: number;
  cols: number;
  no_data_value: number;
  values: number[];
}

/** JSON header + run-length-encoded bit rows (free count first). */
export interface BinaryGridFile {
  origin_x: number;
  origin_y: number;
  cell_size: number;
  rows: number;
  cols: number;
  rle_rows: number[][];
}

export interface DemFile {
  origin_x: number;
  origin_y: number;
  cell_size: number;
  rows: number;
  cols: number;
  heights: number[];
}

export interface HotspotFile {
  contour: Point[];
  polygon: PolygonPayload;
  peak_value: number;
  enclosed_samples: number;
}

export interface RoisFile {
  hotspots: HotspotFile[];
  rois: PolygonPayload[];
  thresholds: { t_bg: number; t_hot: number };
}

export interface CoverageRegionPlan {
  region: PolygonPayload;
  waypoints: Point[];
  segment_kinds: string[];
  cells: Point[][];
  entry: Point;
  exit: Point;
}

export interface CoverageFile {
  regions: CoverageRegionPlan[];
}

export interface RouteFile {
  total_length: number;
  legs: { length: number; waypoints: Point[] }[];
  region_indices: number[];
  unreachable_regions: number[];
}

export interface EstimateFile {
  estimates: { alpha: number; x: number; y: number }[];
}

export interface ReportRow {
  source: string;
  zone: number | null;
  isotope: string;
  activity_mbq: number;
  error_ugv_m: number | null;
  comment: string;
}

export interface ReportFile {
  rows: ReportRow[];
  mean_error_m: number | null;
  localized: number;
  total_sources: number;
}

export const STAGES = [
  "Created",
  "TerrainReady",
  "AerialPlanned",
  "AerialSurveyed",
  "RoisDetected",
  "ObstaclesReady",
  "ObstaclesValidated",
  "CoveragePlanned",
  "RoutesPlanned",
  "GroundSurveyed",
  "Localized",
] as const;
