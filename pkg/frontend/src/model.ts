// Wire types for the annotation service API. These mirror the server's
// canonical-format fragments; the UI never invents fields or labels that
// are not served through /meta.

export type Kind = "person" | "vehicle";

export interface BBox {
  x_min: number;
  y_min: number;
  x_max: number;
  y_max: number;
}

export interface AttributePayload {
  kind: Kind;
  group_id?: string | null;
  unknown_confidence?: Record<string, string>;
  [field: string]: unknown;
}

export interface AgentView {
  agent_image_id: number;
  uuid: string;
  kind: Kind;
  identity: string;
  bbox: BBox;
  annotated: AttributePayload | null;
  error_in_labelling: boolean;
}

export interface GroupView {
  group_id: string;
  members: number[];
}

export interface TaskImage {
  image_id: string;
  file_path: string;
  image_url: string;
  width: number;
  height: number;
  sequence_id: string | null;
  key_frame: boolean;
}

export interface Progress {
  annotator_id: string;
  agents_done: number;
  images_done: number;
  dataset_goal: number;
  dataset_agents_done: number;
  dataset_done: boolean;
  // Present on the wire but never rendered: the pool split is the
  // scheduler's business, not the annotator's.
  inter_done?: number;
  inter_quota?: number;
  exclusive_done?: number;
}

export interface Task {
  status: "ok" | "done";
  dataset_id?: string;
  image?: TaskImage;
  agents?: AgentView[];
  groups?: GroupView[];
  progress: Progress;
}

export interface Alphabets {
  person: Record<string, string[]>;
  vehicle: Record<string, string[]>;
}

export interface Meta {
  datasets: string[];
  alphabets: Alphabets;
  unknown_qualifiers: string[];
}

export interface SubmitAck {
  status: string;
  image_complete: boolean;
  propagated: number;
  progress: Progress;
}

export interface ApiError {
  code: string;
  message: string;
  details: string[];
}

export const UNKNOWN = "unknown";

export function fieldsOf(meta: Meta, kind: Kind): string[] {
  return Object.keys(meta.alphabets[kind]);
}

export function alphabetOf(meta: Meta, kind: Kind, field: string): string[] {
  return meta.alphabets[kind][field] ?? [];
}
