// Payload shapes of the gateway HTTP + stream interface. The dashboard does
// no clinical computation: every band, alert state, and validation verdict
// shown on screen originates from one of these server payloads.

export type Role = "nurse" | "physician";

export type BandLabel = "normal" | "warning" | "critical";

export const VITAL_KINDS = [
  "body_temperature",
  "heart_rate",
  "systolic_bp",
  "diastolic_bp",
  "blood_glucose",
] as const;

export type VitalKindLabel = (typeof VITAL_KINDS)[number];

export const KIND_UNITS: Record<VitalKindLabel, string> = {
  body_temperature: "°C",
  heart_rate: "bpm",
  systolic_bp: "mmHg",
  diastolic_bp: "mmHg",
  blood_glucose: "mg/dL",
};

export interface EmergencyContact {
  name: string;
  phone: string;
  address: string;
  relationship: string;
}

export interface Patient {
  id: number;
  last_name: string;
  first_name: string;
  address: string;
  mobile_phone: string;
  home_phone: string;
  social_insurance_number: string;
  date_of_birth: string;
  height_ft: number | null;
  weight_lb: number | null;
  email: string;
  emergency_contact: EmergencyContact;
}

export interface PatientList {
  patients: Patient[];
  count: number;
}

export interface Reading {
  patient_id: number;
  node_id: number;
  seq: number;
  timestamp_ms: number;
  kind: VitalKindLabel;
  value: number;
  value_x10: number;
  band: BandLabel;
}

export interface NoteEntry {
  patient_id: number;
  created_at_s: number;
  text: string;
  reading_ref: string | null;
}

export interface Prescription {
  patient_id: number;
  physician_registration_number: string;
  text: string;
  created_at_s: number;
}

export interface JournalEntry {
  patient_id: number;
  category: string;
  text: string;
  created_at_s: number;
}

export interface PatientDetail {
  patient: Patient;
  last_update_ms: number | null;
  notes: NoteEntry[];
  prescriptions: Prescription[];
  history: JournalEntry[];
  medications: JournalEntry[];
  conditions: JournalEntry[];
}

export interface Alert {
  alert_id: number;
  patient_id: number;
  kind: VitalKindLabel;
  band: BandLabel;
  reason: string;
  value: number;
  timestamp_ms: number;
  raised_at_s: number;
  state: "open" | "acked" | "closed";
  acked_by: string | null;
  acked_role: string | null;
  acked_at_s: number | null;
  closed_at_s: number | null;
  cleared_unacked: boolean;
  renotify_count: number;
  escalation_exhausted: boolean;
}

export interface KbInterval {
  lower: number | null;
  upper: number | null;
  band: BandLabel;
}

export interface KbPayload {
  revision: number;
  author: string;
  updated_at: string;
  tables: Record<string, KbInterval[]>;
  trends: Record<string, { window_s: number; max_abs_delta: number }>;
  debounce: {
    n_warning_raise: number;
    n_critical_raise: number;
    m_clear: number;
  };
}

export type StreamEvent =
  | ({ type: "hello"; role: string; now_s: number })
  | ({ type: "reading_stored" } & Reading)
  | { type: "alert_raised"; alert: Alert }
  | { type: "alert_acked"; alert: Alert }
  | { type: "alert_cleared"; alert: Alert }
  | { type: "kb_updated"; revision: number; author: string; updated_at: string };

export interface Metrics {
  [counter: string]: number;
}
