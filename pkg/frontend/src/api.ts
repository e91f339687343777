// Typed client for the gateway HTTP interface. The X-Role header rides on
// every request; a FetchLike can be injected for tests.

import type {
  Alert,
  KbPayload,
  Metrics,
  Patient,
  PatientDetail,
  PatientList,
  Prescription,
  Reading,
  Role,
} from "./types.js";

export type FetchLike = (input: string, init?: RequestInit) => Promise<Response>;

export class ApiError extends Error {
  constructor(
    public status: number,
    message: string,
    public errors: string[] = [],
  ) {
    super(message);
  }
}

export class ApiClient {
  constructor(
    public baseUrl: string,
    public role: Role,
    private fetchImpl: FetchLike = (input, init) => fetch(input, init),
  ) {}

  private async request<T>(
    method: string,
    path: string,
    body?: unknown,
  ): Promise<T> {
    const init: RequestInit = {
      method,
      headers: { "X-Role": this.role },
    };
    if (body !== undefined) {
      init.headers = { ...init.headers, "Content-Type": "application/json" };
      init.body = JSON.stringify(body);
    }
    const response = await this.fetchImpl(this.baseUrl + path, init);
    const payload = await response.json().catch(() => ({}));
    if (!response.ok) {
      throw new ApiError(
        response.status,
        payload.error ?? `${method} ${path} failed (${response.status})`,
        payload.errors ?? [],
      );
    }
    return payload as T;
  }

  searchPatients(name?: string, id?: number): Promise<PatientList> {
    const params = new URLSearchParams();
    if (name) params.set("name", name);
    if (id !== undefined && !Number.isNaN(id)) params.set("id", String(id));
    const query = params.toString();
    return this.request("GET", `/patients${query ? "?" + query : ""}`);
  }

  getPatient(id: number): Promise<Patient> {
    return this.request("GET", `/patients/${id}`);
  }

  getDetail(id: number): Promise<PatientDetail> {
    return this.request("GET", `/patients/${id}/detail`);
  }

  getReadings(
    id: number,
    options: { kind?: string; band?: string; from?: number; to?: number } = {},
  ): Promise<{ readings: Reading[]; count: number }> {
    const params = new URLSearchParams();
    if (options.kind) params.set("kind", options.kind);
    if (options.band) params.set("band", options.band);
    if (options.from !== undefined) params.set("from", String(options.from));
    if (options.to !== undefined) params.set("to", String(options.to));
    const query = params.toString();
    return this.request("GET", `/patients/${id}/readings${query ? "?" + query : ""}`);
  }

  addPrescription(
    id: number,
    registration: string,
    text: string,
  ): Promise<Prescription> {
    return this.request("POST", `/patients/${id}/prescriptions`, {
      physician_registration_number: registration,
      text,
    });
  }

  listAlerts(state?: string): Promise<{ alerts: Alert[]; count: number }> {
    return this.request("GET", `/alerts${state ? "?state=" + state : ""}`);
  }

  ackAlert(alertId: number, user: string): Promise<Alert> {
    return this.request("POST", `/alerts/${alertId}/ack`, { user });
  }

  getKb(): Promise<KbPayload> {
    return this.request("GET", "/kb");
  }

  putKb(kb: KbPayload & { author?: string }): Promise<KbPayload> {
    return this.request("PUT", "/kb", kb);
  }

  getMetrics(): Promise<Metrics> {
    return this.request("GET", "/metrics");
  }
}
