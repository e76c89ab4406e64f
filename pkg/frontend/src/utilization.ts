// Utilization charts: hectares, farms/day and revenue, visible to the
// financing and fleet-management sides only.

import type { Session } from "./session.js";
import type { UtilizationReport } from "./types.js";

export const UTILIZATION_ROLES = ["financier", "fleet_manager", "admin"] as const;

export function canViewUtilization(session: Session): boolean {
  return session.roles.some((role) =>
    (UTILIZATION_ROLES as readonly string[]).includes(role));
}

export interface ChartBar {
  label: string;
  value: number;
}

export interface UtilizationCharts {
  tractorId: string;
  period: string;
  bars: ChartBar[];
  farmsPerDay: number;
  empty: boolean;
}

export type UtilizationState =
  | { kind: "charts"; charts: UtilizationCharts }
  | { kind: "denied"; explanation: string };

export function buildUtilizationView(session: Session,
                                     report: UtilizationReport
                                     ): UtilizationState {
  if (!canViewUtilization(session)) {
    return {
      kind: "denied",
      explanation: "utilization insight is limited to financiers and fleet managers",
    };
  }
  const bars: ChartBar[] = [
    { label: "hectares served", value: report.hectares_served },
    { label: "farms served", value: report.farms_served },
    { label: "farms/day", value: report.farms_per_day },
    { label: "revenue", value: report.revenue },
    { label: "idle days", value: report.idle_days },
  ];
  return {
    kind: "charts",
    charts: {
      tractorId: report.tractor_id,
      period: `${report.period_start} to ${report.period_end}`,
      bars,
      farmsPerDay: report.farms_per_day,
      empty: report.farms_served === 0 && report.hectares_served === 0,
    },
  };
}
