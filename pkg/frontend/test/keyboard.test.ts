// Keyboard reducer mapping.

import { describe, expect, it } from "vitest";

import { SHORTCUT_LEGEND, actionForKey } from "../src/keyboard";

describe("actionForKey", () => {
  it("cycles agents with tab and arrows", () => {
    expect(actionForKey("Tab")).toEqual({ type: "select_next" });
    expect(actionForKey("Tab", true)).toEqual({ type: "select_prev" });
    expect(actionForKey("ArrowRight")).toEqual({ type: "select_next" });
    expect(actionForKey("ArrowLeft")).toEqual({ type: "select_prev" });
  });

  it("digits pick options, home row focuses fields", () => {
    expect(actionForKey("1")).toEqual({ type: "pick_option", index: 0 });
    expect(actionForKey("9")).toEqual({ type: "pick_option", index: 8 });
    expect(actionForKey("q")).toEqual({ type: "focus_field", index: 0 });
    expect(actionForKey("t")).toEqual({ type: "focus_field", index: 4 });
  });

  it("maps the special actions", () => {
    expect(actionForKey("u")).toEqual({ type: "set_unknown" });
    expect(actionForKey("n")).toEqual({ type: "toggle_not_clear" });
    expect(actionForKey("x")).toEqual({ type: "toggle_error_flag" });
    expect(actionForKey("g")).toEqual({ type: "link_selection" });
    expect(actionForKey("b")).toEqual({ type: "unlink_selected" });
    expect(actionForKey("Enter")).toEqual({ type: "submit" });
  });

  it("ignores unmapped keys", () => {
    expect(actionForKey("F12")).toEqual({ type: "none" });
    expect(actionForKey("z")).toEqual({ type: "none" });
  });

  it("legend documents every special key", () => {
    const text = SHORTCUT_LEGEND.map((s) => s.keys).join(" ");
    for (const key of ["Tab", "1-9", "u", "n", "x", "g", "b", "Enter"]) {
      expect(text).toContain(key);
    }
  });
});
