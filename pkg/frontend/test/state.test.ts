// ViewState: completeness gate, selection, qualifier handling, group buffer.

import { readFileSync } from "node:fs";
import { beforeEach, describe, expect, it } from "vitest";

import { Task } from "../src/model";
import { ViewState } from "../src/state";
import { Fixture } from "./fakeServer";

const fixture: Fixture = JSON.parse(
  readFileSync(new URL("./fixtures/tasks_20.json", import.meta.url), "utf-8"),
);

function taskWithAgents(min: number): Task {
  const task = fixture.tasks.find(
    (t) => t.status === "ok" && (t.agents?.length ?? 0) >= min,
  );
  if (!task) throw new Error("fixture lacks a task with enough agents");
  return JSON.parse(JSON.stringify(task));
}

describe("completeness gate", () => {
  let state: ViewState;

  beforeEach(() => {
    state = new ViewState(fixture.meta);
    state.loadTask(taskWithAgents(2));
  });

  function fillAgent(index: number): void {
    state.select(index);
    state.setField("age", "adult");
    state.setField("sex", "unknown");
    state.setField("skin", "light");
    state.setField("means_of_transport", "pedestrian");
  }

  it("submit stays disabled until every agent is complete", () => {
    expect(state.submitEnabled()).toBe(false);
    fillAgent(0);
    expect(state.submitEnabled()).toBe(false);
    for (let i = 1; i < state.agents().length; i += 1) fillAgent(i);
    expect(state.submitEnabled()).toBe(true);
  });

  it("all-unknown counts as complete", () => {
    for (let i = 0; i < state.agents().length; i += 1) {
      state.select(i);
      for (const field of ["age", "sex", "skin", "means_of_transport"]) {
        state.setField(field, "unknown");
      }
    }
    expect(state.submitEnabled()).toBe(true);
  });

  it("error flag forces all fields unknown and completes the agent", () => {
    state.select(0);
    state.setField("age", "adult");
    state.toggleErrorFlag();
    const agent = state.agents()[0];
    expect(state.edits.get(agent.uuid)?.age).toBe("unknown");
    expect(state.agentComplete(agent)).toBe(true);
  });

  it("selection wraps around", () => {
    const count = state.agents().length;
    state.select(count - 1);
    state.selectNext(1);
    expect(state.selected).toBe(0);
    state.selectNext(-1);
    expect(state.selected).toBe(count - 1);
  });
});

describe("qualifier handling", () => {
  it("only sticks to unknown fields and clears when the value changes", () => {
    const state = new ViewState(fixture.meta);
    state.loadTask(taskWithAgents(1));
    state.select(0);
    const agent = state.agents()[0];
    state.setField("sex", "unknown");
    state.setQualifier("sex", "not_clear");
    expect(state.edits.get(agent.uuid)?.unknown_confidence).toEqual({ sex: "not_clear" });
    state.setQualifier("age", "not_clear");  // age not unknown: ignored
    expect(state.edits.get(agent.uuid)?.unknown_confidence).toEqual({ sex: "not_clear" });
    state.setField("sex", "male");
    expect(state.edits.get(agent.uuid)?.unknown_confidence).toBeUndefined();
  });
});

describe("group edit buffer", () => {
  function freshState(): ViewState {
    const state = new ViewState(fixture.meta);
    state.loadTask(taskWithAgents(3));
    return state;
  }

  it("unlink dissolves groups that fall below two members", () => {
    const state = freshState();
    const ids = state.agents().map((a) => a.agent_image_id);
    state.link([ids[0], ids[1]]);
    const group = state.groupOf(ids[0]);
    expect(group).toBeDefined();
    state.unlink(ids[0]);
    expect(state.groupOf(ids[1])).toBeUndefined();
  });

  it("linking into an existing group merges members", () => {
    const state = freshState();
    const ids = state.agents().map((a) => a.agent_image_id);
    state.link([ids[0], ids[1]]);
    state.link([ids[1], ids[2]]);
    const group = state.groupOf(ids[2]);
    expect(group?.members).toContain(ids[0]);
    expect(group?.members).toContain(ids[1]);
    expect(state.groups.filter((g) => g.members.includes(ids[1]))).toHaveLength(1);
  });

  it("payloadFor back-references the group", () => {
    const state = freshState();
    const agents = state.agents();
    state.link([agents[0].agent_image_id, agents[1].agent_image_id]);
    for (let i = 0; i < agents.length; i += 1) {
      state.select(i);
      for (const field of ["age", "sex", "skin", "means_of_transport"]) {
        state.setField(field, "unknown");
      }
    }
    const groupId = state.groupOf(agents[0].agent_image_id)!.group_id;
    expect(state.payloadFor(agents[0]).group_id).toBe(groupId);
    const lastAgent = agents[agents.length - 1];
    if (state.groupOf(lastAgent.agent_image_id) === undefined) {
      expect(state.payloadFor(lastAgent).group_id).toBeNull();
    }
  });
});

describe("render model", () => {
  it("mentions no scheduling pools anywhere", () => {
    const state = new ViewState(fixture.meta);
    state.loadTask(taskWithAgents(1));
    const rendered = JSON.stringify(Object.keys(state.renderModel())) +
      JSON.stringify(state.renderModel().progress);
    expect(rendered).not.toMatch(/inter|exclusive|pool|quota/);
  });

  it("done task renders the completion screen", () => {
    const state = new ViewState(fixture.meta);
    const done = fixture.tasks.find((t) => t.status === "done")!;
    state.loadTask(JSON.parse(JSON.stringify(done)));
    expect(state.renderModel().done).toBe(true);
  });
});
