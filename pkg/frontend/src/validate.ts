// Client-side mirror of the server's attribute rules, used to gate the
// submit button and surface problems before a round trip. The server
// remains the authority; this must stay at least as strict on the rules
// it knows about.

import { AttributePayload, Kind, Meta, UNKNOWN, alphabetOf, fieldsOf } from "./model.js";

export function isComplete(meta: Meta, kind: Kind, payload: AttributePayload | null): boolean {
  if (payload === null || payload.kind !== kind) return false;
  return fieldsOf(meta, kind).every((field) => typeof payload[field] === "string");
}

export function validatePayload(
  meta: Meta,
  kind: Kind,
  payload: AttributePayload,
  errorInLabelling = false,
): string[] {
  const problems: string[] = [];
  if (payload.kind !== kind) {
    return [`attributes.kind: expected ${kind}, got ${payload.kind}`];
  }
  for (const field of fieldsOf(meta, kind)) {
    const value = payload[field];
    if (typeof value !== "string") {
      problems.push(`${field}: missing`);
      continue;
    }
    if (!alphabetOf(meta, kind, field).includes(value)) {
      problems.push(`${field}: label '${value}' not in alphabet`);
    }
    if (errorInLabelling && value !== UNKNOWN) {
      problems.push(`${field}: must be 'unknown' when error_in_labelling is set`);
    }
  }
  if (kind === "vehicle" && payload["vehicle_type"] !== "car"
      && payload["car_type"] !== UNKNOWN && payload["car_type"] !== undefined) {
    problems.push("car_type: requires vehicle_type 'car'");
  }
  const confidence = payload.unknown_confidence ?? {};
  for (const [field, qualifier] of Object.entries(confidence)) {
    if (!fieldsOf(meta, kind).includes(field)) {
      problems.push(`unknown_confidence: '${field}' is not an attribute field`);
      continue;
    }
    if (payload[field] !== UNKNOWN) {
      problems.push(`unknown_confidence: field '${field}' is not 'unknown'`);
    }
    if (!meta.unknown_qualifiers.includes(qualifier)) {
      problems.push(`unknown_confidence: bad qualifier '${qualifier}'`);
    }
  }
  if (kind === "vehicle" && payload.unknown_confidence !== undefined) {
    problems.push("unknown_confidence: vehicles carry no qualifier");
  }
  return problems;
}
