// View state for one task: selection, pending edits, group buffer, zoom.
// Pure data + methods; no DOM access, so the whole workflow is testable
// and scriptable headlessly.

import {
  AgentView,
  AttributePayload,
  GroupView,
  Meta,
  Task,
  UNKNOWN,
  fieldsOf,
} from "./model.js";
import { isComplete, validatePayload } from "./validate.js";

export interface Viewport {
  scale: number;
  offsetX: number;
  offsetY: number;
}

export interface RenderModel {
  imageUrl: string;
  imageId: string;
  boxes: { agentImageId: number; uuid: string; selected: boolean; complete: boolean }[];
  tabs: { agentImageId: number; label: string; selected: boolean; complete: boolean }[];
  groupBadges: { groupId: string; members: number[] }[];
  menu: { field: string; options: string[]; value: string | null; qualifier: string | null }[];
  progress: { agentsDone: number; goal: number; imagesDone: number };
  submitEnabled: boolean;
  done: boolean;
}

export class ViewState {
  meta: Meta;
  task: Task | null = null;
  selected = 0;
  edits = new Map<string, AttributePayload>();
  errorFlags = new Map<string, boolean>();
  groups: GroupView[] = [];
  viewport: Viewport = { scale: 1, offsetX: 0, offsetY: 0 };
  fieldErrors = new Map<string, string[]>();

  constructor(meta: Meta) {
    this.meta = meta;
  }

  loadTask(task: Task): void {
    this.task = task;
    this.selected = 0;
    this.edits = new Map();
    this.errorFlags = new Map();
    this.fieldErrors = new Map();
    this.viewport = { scale: 1, offsetX: 0, offsetY: 0 };
    this.groups = (task.groups ?? []).map((g) => ({
      group_id: g.group_id,
      members: [...g.members],
    }));
    for (const agent of task.agents ?? []) {
      if (agent.annotated !== null) {
        this.edits.set(agent.uuid, { ...agent.annotated });
        this.errorFlags.set(agent.uuid, agent.error_in_labelling);
      }
    }
  }

  agents(): AgentView[] {
    return this.task?.agents ?? [];
  }

  selectedAgent(): AgentView | null {
    return this.agents()[this.selected] ?? null;
  }

  select(index: number): void {
    const count = this.agents().length;
    if (count > 0) this.selected = ((index % count) + count) % count;
  }

  selectNext(step = 1): void {
    this.select(this.selected + step);
  }

  draftFor(agent: AgentView): AttributePayload {
    let draft = this.edits.get(agent.uuid);
    if (draft === undefined) {
      draft = { kind: agent.kind };
      this.edits.set(agent.uuid, draft);
    }
    return draft;
  }

  setField(field: string, value: string): void {
    const agent = this.selectedAgent();
    if (agent === null) return;
    const draft = this.draftFor(agent);
    draft[field] = value;
    if (value !== UNKNOWN && draft.unknown_confidence !== undefined) {
      delete draft.unknown_confidence[field];
      if (Object.keys(draft.unknown_confidence).length === 0) {
        delete draft.unknown_confidence;
      }
    }
    if (agent.kind === "vehicle" && field === "vehicle_type" && value !== "car") {
      draft["car_type"] = UNKNOWN;
    }
  }

  setQualifier(field: string, qualifier: string | null): void {
    const agent = this.selectedAgent();
    if (agent === null) return;
    const draft = this.draftFor(agent);
    if (draft[field] !== UNKNOWN || agent.kind !== "person") return;
    if (qualifier === null) {
      if (draft.unknown_confidence) delete draft.unknown_confidence[field];
      return;
    }
    draft.unknown_confidence = { ...(draft.unknown_confidence ?? {}), [field]: qualifier };
  }

  toggleErrorFlag(): void {
    const agent = this.selectedAgent();
    if (agent === null) return;
    const next = !(this.errorFlags.get(agent.uuid) ?? false);
    this.errorFlags.set(agent.uuid, next);
    if (next) {
      const draft = this.draftFor(agent);
      for (const field of fieldsOf(this.meta, agent.kind)) draft[field] = UNKNOWN;
      delete draft.unknown_confidence;
    }
  }

  // -- group edit buffer ----------------------------------------------------

  private nextGroupId(): string {
    let n = 1;
    const taken = new Set(this.groups.map((g) => g.group_id));
    while (taken.has(`g${n}`)) n += 1;
    return `g${n}`;
  }

  groupOf(agentImageId: number): GroupView | undefined {
    return this.groups.find((g) => g.members.includes(agentImageId));
  }

  unlink(agentImageId: number): void {
    const group = this.groupOf(agentImageId);
    if (group === undefined) return;
    group.members = group.members.filter((m) => m !== agentImageId);
    this.groups = this.groups.filter((g) => g.members.length >= 2);
  }

  link(agentImageIds: number[]): void {
    const union = new Set(agentImageIds);
    if (union.size < 2) return;
    // Groups are disjoint, so one pass absorbs every group touching the
    // linked ids; the first absorbed group donates its id.
    const absorbed = this.groups.filter((g) => g.members.some((m) => union.has(m)));
    for (const group of absorbed) for (const member of group.members) union.add(member);
    const groupId = absorbed[0]?.group_id ?? this.nextGroupId();
    this.groups = this.groups.filter((g) => !absorbed.includes(g));
    this.groups.push({ group_id: groupId, members: [...union].sort((a, b) => a - b) });
  }

  groupsPayload(): { group_id: string; members: number[] }[] {
    return this.groups.map((g) => ({ group_id: g.group_id, members: [...g.members] }));
  }

  // -- completeness gate ------------------------------------------------------

  agentComplete(agent: AgentView): boolean {
    const draft = this.edits.get(agent.uuid) ?? null;
    return isComplete(this.meta, agent.kind, draft);
  }

  submitEnabled(): boolean {
    const agents = this.agents();
    return agents.length > 0 && agents.every((a) => this.agentComplete(a));
  }

  validateAll(): Map<string, string[]> {
    const problems = new Map<string, string[]>();
    for (const agent of this.agents()) {
      const draft = this.edits.get(agent.uuid);
      if (draft === undefined) {
        problems.set(agent.uuid, ["not annotated"]);
        continue;
      }
      const found = validatePayload(
        this.meta, agent.kind, draft, this.errorFlags.get(agent.uuid) ?? false,
      );
      if (found.length > 0) problems.set(agent.uuid, found);
    }
    return problems;
  }

  payloadFor(agent: AgentView): AttributePayload {
    const draft = this.edits.get(agent.uuid);
    if (draft === undefined) throw new Error(`agent ${agent.uuid} has no draft`);
    const group = this.groupOf(agent.agent_image_id);
    const payload: AttributePayload = { ...draft };
    if (agent.kind === "person") {
      payload.group_id = group?.group_id ?? null;
    }
    return payload;
  }

  // -- render model -------------------------------------------------------------
  // Everything the DOM layer shows. Deliberately carries no trace of the
  // scheduling pools: the control-pool transition must be invisible here.

  renderModel(): RenderModel {
    const task = this.task;
    if (task === null || task.status !== "ok" || !task.image) {
      return {
        imageUrl: "",
        imageId: "",
        boxes: [],
        tabs: [],
        groupBadges: [],
        menu: [],
        progress: {
          agentsDone: task?.progress.agents_done ?? 0,
          goal: task?.progress.dataset_goal ?? 0,
          imagesDone: task?.progress.images_done ?? 0,
        },
        submitEnabled: false,
        done: true,
      };
    }
    const selected = this.selectedAgent();
    const menu = selected === null ? [] : fieldsOf(this.meta, selected.kind).map((field) => {
      const draft = this.edits.get(selected.uuid);
      const value = typeof draft?.[field] === "string" ? (draft[field] as string) : null;
      const qualifier = draft?.unknown_confidence?.[field] ?? null;
      return {
        field,
        options: [...this.meta.alphabets[selected.kind][field]],
        value,
        qualifier,
      };
    });
    return {
      imageUrl: task.image.image_url,
      imageId: task.image.image_id,
      boxes: this.agents().map((a, i) => ({
        agentImageId: a.agent_image_id,
        uuid: a.uuid,
        selected: i === this.selected,
        complete: this.agentComplete(a),
      })),
      tabs: this.agents().map((a, i) => ({
        agentImageId: a.agent_image_id,
        label: `#${a.agent_image_id} ${a.identity}`,
        selected: i === this.selected,
        complete: this.agentComplete(a),
      })),
      groupBadges: this.groups.map((g) => ({ groupId: g.group_id, members: [...g.members] })),
      menu,
      progress: {
        agentsDone: task.progress.agents_done,
        goal: task.progress.dataset_goal,
        imagesDone: task.progress.images_done,
      },
      submitEnabled: this.submitEnabled(),
      done: false,
    };
  }
}
