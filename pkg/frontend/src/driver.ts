// Headless workflow driver: completes a dataset through the Api exactly
// the way the interactive app does (ViewState edits, group round trips,
// per-agent submissions, advance on acks). Used by the automated tests
// and usable against a live server for smoke checks.

import { Api } from "./api.js";
import { AgentView, Meta, Task, UNKNOWN, alphabetOf, fieldsOf } from "./model.js";
import { ViewState } from "./state.js";

export interface DriverReport {
  tasksCompleted: number;
  payloadsSent: number;
  groupRoundTrips: number;
  groupEchoMismatches: number;
  validationFailures: string[];
  taskShapes: Set<string>;
  renderShapes: Set<string>;
  progressSeen: { agentsDone: number; goal: number }[];
}

function shapeOf(value: unknown): string {
  if (Array.isArray(value)) {
    return value.length === 0 ? "[]" : `[${shapeOf(value[0])}]`;
  }
  if (value !== null && typeof value === "object") {
    return `{${Object.keys(value as object).sort().join(",")}}`;
  }
  return typeof value;
}

// Deterministic label choice: prefilled value if present, else a label
// picked from the served alphabet by a simple hash of the agent uuid.
function chooseLabel(meta: Meta, agent: AgentView, field: string, salt: number): string {
  const prefilled = agent.annotated?.[field];
  if (typeof prefilled === "string") return prefilled;
  const alphabet = alphabetOf(meta, agent.kind, field);
  let hash = salt;
  for (const ch of agent.uuid + field) hash = (hash * 31 + ch.charCodeAt(0)) % 9973;
  return alphabet[hash % alphabet.length];
}

export async function runDriver(
  api: Api,
  annotatorId: string,
  datasetId: string,
  options: { maxTasks?: number; groupEditEvery?: number; salt?: number } = {},
): Promise<DriverReport> {
  const report: DriverReport = {
    tasksCompleted: 0,
    payloadsSent: 0,
    groupRoundTrips: 0,
    groupEchoMismatches: 0,
    validationFailures: [],
    taskShapes: new Set(),
    renderShapes: new Set(),
    progressSeen: [],
  };
  const meta = await api.meta();
  await api.startSession(annotatorId, datasetId);
  const state = new ViewState(meta);
  const maxTasks = options.maxTasks ?? 1000;
  const groupEditEvery = options.groupEditEvery ?? 3;

  for (let round = 0; round < maxTasks; round += 1) {
    const task: Task = await api.getTask();
    report.taskShapes.add(shapeOf(task));
    if (task.status !== "ok" || !task.image) break;
    state.loadTask(task);
    report.renderShapes.add(shapeOf(state.renderModel()));
    report.progressSeen.push({
      agentsDone: task.progress.agents_done,
      goal: task.progress.dataset_goal,
    });

    // Periodic group edit: unlink one member, relink it, push to the
    // server, and check the echo matches the local buffer.
    if (state.groups.length > 0 && round % groupEditEvery === 0) {
      const group = state.groups[0];
      const member = group.members[group.members.length - 1];
      const rest = group.members.filter((m) => m !== member);
      state.unlink(member);
      state.link([...rest, member]);
      const echo = await api.setGroups(task.image.image_id, state.groupsPayload());
      report.groupRoundTrips += 1;
      const local = JSON.stringify(state.groupsPayload());
      const remote = JSON.stringify(echo.groups);
      if (local !== remote) report.groupEchoMismatches += 1;
    }

    // Fill every agent through the same state transitions the UI uses.
    for (let i = 0; i < state.agents().length; i += 1) {
      state.select(i);
      const agent = state.agents()[i];
      for (const field of fieldsOf(meta, agent.kind)) {
        state.setField(field, chooseLabel(meta, agent, field, options.salt ?? 7));
        const draft = state.edits.get(agent.uuid);
        if (draft?.[field] === UNKNOWN && agent.kind === "person") {
          state.setQualifier(field, i % 2 === 0 ? "clear" : "not_clear");
        }
      }
    }
    const problems = state.validateAll();
    if (problems.size > 0) {
      for (const [uuid, list] of problems) {
        report.validationFailures.push(`${task.image.image_id}/${uuid}: ${list.join("; ")}`);
      }
      break;
    }
    if (!state.submitEnabled()) {
      report.validationFailures.push(`${task.image.image_id}: submit gate closed`);
      break;
    }
    let allAcked = true;
    for (const agent of state.agents()) {
      const ack = await api.submitAnnotation({
        agentUuid: agent.uuid,
        imageId: task.image.image_id,
        attributes: state.payloadFor(agent),
        errorInLabelling: state.errorFlags.get(agent.uuid) ?? false,
      });
      report.payloadsSent += 1;
      if (ack.status !== "ok") allAcked = false;
    }
    if (!allAcked) break;
    report.tasksCompleted += 1;
  }
  return report;
}
