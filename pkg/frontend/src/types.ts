// Payload shapes of the gateway API the dashboard consumes.

export type Role =
  | "agent"
  | "farmer"
  | "fleet_manager"
  | "operator"
  | "supervisor"
  | "financier"
  | "admin";

export interface Step {
  action_name: string;
  required_role: Role;
  required_inputs: string[];
  document_slots: string[];
  emits_topic: string | null;
}

export interface WorkflowDefinition {
  workflow_id: string;
  version: number;
  steps: Step[];
}

export interface ActionRecord {
  action_name: string;
  actor_correlation: string;
  actor_role: Role;
  timestamp: number;
  payload_digest: string;
  tx_id: string;
}

export type InstanceStatus = "ACTIVE" | "COMPLETED" | "CANCELLED";

export interface InstanceView {
  instance_id: string;
  workflow_id: string;
  version: number;
  farm_id: string;
  booking_id: string;
  status: InstanceStatus;
  current_step_index: number;
  history: ActionRecord[];
  audit_trail: ActionRecord[];
  flags: string[];
  booking: Record<string, unknown>;
}

export interface BookingRow {
  instance_id: string;
  booking_id: string;
  farm_id: string;
  status: InstanceStatus;
  current_step_index: number;
  service_type?: string;
  scheduled_date?: string;
  tractor_id?: string;
  flags: string[];
}

export interface GeoJsonPolygon {
  type: "Feature";
  geometry: { type: "Polygon"; coordinates: number[][][] };
  properties: { farm_id: string; area_ha: number; method: string };
}

export interface ClusterMember {
  booking_id: string;
  farm_id: string;
  instance_id: string;
  boundary: GeoJsonPolygon | null;
}

export interface ClusterView {
  cluster_id: string;
  booking_ids: string[];
  centroid: [number, number];
  total_ha: number;
  skill: string;
  members: ClusterMember[];
}

export interface ClustersResponse {
  clusters: ClusterView[];
  params: { max_radius_km: number; max_cluster_ha: number | null };
}

export interface AssignmentRow {
  cluster_id: string;
  tractor_id: string;
  operator_id: string;
  cost: number;
}

export interface AssignmentResponse {
  clusters: ClustersResponse;
  assignment: {
    assignments: AssignmentRow[];
    unmatched_cluster_ids: string[];
    total_cost: number;
  };
}

export interface UtilizationReport {
  tractor_id: string;
  period_start: string;
  period_end: string;
  hectares_served: number;
  farms_served: number;
  active_days: number;
  idle_days: number;
  farms_per_day: number;
  revenue: number;
}

export interface ApiError {
  code: string;
  message: string;
}
