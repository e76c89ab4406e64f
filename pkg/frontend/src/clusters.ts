// Cluster map view model: GeoJSON polygons onto an SVG canvas without
// touching the source coordinates (the round-trip test depends on it).

import type { AssignmentResponse, ClusterView, ClustersResponse,
              GeoJsonPolygon } from "./types.js";

export interface MapPolygon {
  farmId: string;
  areaHa: number;
  /** [lon, lat] ring exactly as received. */
  ring: number[][];
  svgPoints: string;
}

export interface ClusterCard {
  clusterId: string;
  skill: string;
  totalHa: number;
  farmIds: string[];
  polygons: MapPolygon[];
  tractorId: string | null;
  operatorId: string | null;
}

export interface ClusterViewModel {
  date: string;
  cards: ClusterCard[];
  empty: boolean;
}

export interface Viewport {
  minLon: number;
  maxLon: number;
  minLat: number;
  maxLat: number;
  width: number;
  height: number;
}

export function viewportFor(polygons: MapPolygon[], width = 640,
                            height = 480): Viewport {
  let minLon = Infinity, maxLon = -Infinity;
  let minLat = Infinity, maxLat = -Infinity;
  for (const polygon of polygons) {
    for (const [lon, lat] of polygon.ring) {
      if (lon < minLon) minLon = lon;
      if (lon > maxLon) maxLon = lon;
      if (lat < minLat) minLat = lat;
      if (lat > maxLat) maxLat = lat;
    }
  }
  if (!polygons.length) {
    minLon = 0; maxLon = 1; minLat = 0; maxLat = 1;
  }
  return { minLon, maxLon, minLat, maxLat, width, height };
}

export function project(viewport: Viewport, lon: number, lat: number): [number, number] {
  const spanLon = viewport.maxLon - viewport.minLon || 1e-9;
  const spanLat = viewport.maxLat - viewport.minLat || 1e-9;
  const x = ((lon - viewport.minLon) / spanLon) * viewport.width;
  const y = viewport.height - ((lat - viewport.minLat) / spanLat) * viewport.height;
  return [x, y];
}

export function toMapPolygon(feature: GeoJsonPolygon,
                             viewport?: Viewport): MapPolygon {
  const ring = feature.geometry.coordinates[0];
  const vp = viewport ?? viewportFor([{ farmId: "", areaHa: 0, ring, svgPoints: "" }]);
  const svgPoints = ring
    .map(([lon, lat]) => project(vp, lon, lat).map((v) => v.toFixed(2)).join(","))
    .join(" ");
  return {
    farmId: feature.properties.farm_id,
    areaHa: feature.properties.area_ha,
    ring,
    svgPoints,
  };
}

export function buildClusterView(date: string, clusters: ClustersResponse,
                                 assignment?: AssignmentResponse
                                 ): ClusterViewModel {
  const pairOf = new Map<string, { tractor: string; operator: string }>();
  if (assignment) {
    for (const row of assignment.assignment.assignments) {
      pairOf.set(row.cluster_id, { tractor: row.tractor_id,
                                   operator: row.operator_id });
    }
  }
  const cards: ClusterCard[] = clusters.clusters.map((cluster: ClusterView) => {
    const features = cluster.members
      .map((member) => member.boundary)
      .filter((b): b is GeoJsonPolygon => b !== null);
    const rings = features.map((f) => ({
      farmId: f.properties.farm_id, areaHa: f.properties.area_ha,
      ring: f.geometry.coordinates[0], svgPoints: "",
    }));
    const viewport = viewportFor(rings);
    const pair = pairOf.get(cluster.cluster_id);
    return {
      clusterId: cluster.cluster_id,
      skill: cluster.skill,
      totalHa: cluster.total_ha,
      farmIds: cluster.members.map((m) => m.farm_id),
      polygons: features.map((f) => toMapPolygon(f, viewport)),
      tractorId: pair?.tractor ?? null,
      operatorId: pair?.operator ?? null,
    };
  });
  return { date, cards, empty: cards.length === 0 };
}
