// Typed client for the annotation service HTTP API. The interface is
// what the headless driver and the tests' fake server implement too.

import { AttributePayload, GroupView, Meta, Progress, SubmitAck, Task } from "./model.js";

export interface SubmitRequest {
  agentUuid: string;
  imageId: string;
  attributes: AttributePayload;
  errorInLabelling: boolean;
}

export interface Api {
  meta(): Promise<Meta>;
  startSession(annotatorId: string, datasetId: string): Promise<{ token: string; progress: Progress }>;
  getTask(): Promise<Task>;
  submitAnnotation(request: SubmitRequest): Promise<SubmitAck>;
  setGroups(imageId: string, groups: GroupView[]): Promise<{ status: string; groups: GroupView[] }>;
  flagImage(imageId: string, reason: string): Promise<{ status: string }>;
}

export class ApiRequestError extends Error {
  code: string;
  details: string[];
  status: number;

  constructor(status: number, code: string, message: string, details: string[]) {
    super(message);
    this.status = status;
    this.code = code;
    this.details = details;
  }
}

async function parseOrThrow<T>(response: Response): Promise<T> {
  const body = await response.json();
  if (!response.ok) {
    const error = body?.error ?? {};
    throw new ApiRequestError(
      response.status,
      error.code ?? "error",
      error.message ?? response.statusText,
      error.details ?? [],
    );
  }
  return body as T;
}

export class HttpApi implements Api {
  private base: string;
  private token = "";
  private dataset = "";

  constructor(base = "") {
    this.base = base.replace(/\/$/, "");
  }

  async meta(): Promise<Meta> {
    return parseOrThrow(await fetch(`${this.base}/meta`));
  }

  async startSession(annotatorId: string, datasetId: string) {
    const response = await fetch(`${this.base}/sessions`, {
      method: "POST",
      headers: { "content-type": "application/json" },
      body: JSON.stringify({ annotator_id: annotatorId, dataset_id: datasetId }),
    });
    const body = await parseOrThrow<{ token: string; progress: Progress }>(response);
    this.token = body.token;
    this.dataset = datasetId;
    return body;
  }

  async getTask(): Promise<Task> {
    const params = new URLSearchParams({ token: this.token, dataset: this.dataset });
    return parseOrThrow(await fetch(`${this.base}/task?${params}`));
  }

  async submitAnnotation(request: SubmitRequest): Promise<SubmitAck> {
    const response = await fetch(`${this.base}/annotations`, {
      method: "POST",
      headers: { "content-type": "application/json" },
      body: JSON.stringify({
        dataset_id: this.dataset,
        token: this.token,
        image_id: request.imageId,
        agent_uuid: request.agentUuid,
        attributes: request.attributes,
        error_in_labelling: request.errorInLabelling,
      }),
    });
    return parseOrThrow(response);
  }

  async setGroups(imageId: string, groups: GroupView[]) {
    const response = await fetch(`${this.base}/groups`, {
      method: "POST",
      headers: { "content-type": "application/json" },
      body: JSON.stringify({
        dataset_id: this.dataset,
        token: this.token,
        image_id: imageId,
        groups,
      }),
    });
    return parseOrThrow<{ status: string; groups: GroupView[] }>(response);
  }

  async flagImage(imageId: string, reason: string) {
    const response = await fetch(`${this.base}/flags`, {
      method: "POST",
      headers: { "content-type": "application/json" },
      body: JSON.stringify({
        dataset_id: this.dataset,
        token: this.token,
        image_id: imageId,
        reason,
      }),
    });
    return parseOrThrow<{ status: string }>(response);
  }
}
