// Keyboard shortcuts as a pure mapping from key events to actions, for
// throughput annotation without touching the mouse. The app layer applies
// the returned action to the ViewState.

export type KeyAction =
  | { type: "select_next" }
  | { type: "select_prev" }
  | { type: "focus_field"; index: number }
  | { type: "pick_option"; index: number }
  | { type: "set_unknown" }
  | { type: "toggle_not_clear" }
  | { type: "toggle_error_flag" }
  | { type: "link_selection" }
  | { type: "unlink_selected" }
  | { type: "submit" }
  | { type: "toggle_help" }
  | { type: "none" };

// One home-row key per attribute row, digits pick within the focused row.
const FIELD_KEYS = ["q", "w", "e", "r", "t"];

export function actionForKey(key: string, shift = false): KeyAction {
  if (key === "Tab" || key === "ArrowRight") return shift ? { type: "select_prev" } : { type: "select_next" };
  if (key === "ArrowLeft") return { type: "select_prev" };
  if (key >= "1" && key <= "9") return { type: "pick_option", index: Number(key) - 1 };
  const fieldIndex = FIELD_KEYS.indexOf(key.toLowerCase());
  if (fieldIndex >= 0) return { type: "focus_field", index: fieldIndex };
  switch (key.toLowerCase()) {
    case "u":
      return { type: "set_unknown" };
    case "n":
      return { type: "toggle_not_clear" };
    case "x":
      return { type: "toggle_error_flag" };
    case "g":
      return { type: "link_selection" };
    case "b":
      return { type: "unlink_selected" };
    case "enter":
      return { type: "submit" };
    case "?":
    case "h":
      return { type: "toggle_help" };
    default:
      return { type: "none" };
  }
}

export const SHORTCUT_LEGEND: { keys: string; does: string }[] = [
  { keys: "Tab / arrows", does: "cycle through agents" },
  { keys: "q w e r t", does: "focus attribute row 1-5" },
  { keys: "1-9", does: "pick the n-th value in the focused row" },
  { keys: "u", does: "set the focused attribute to unknown" },
  { keys: "n", does: "toggle the 'not clear' qualifier on an unknown" },
  { keys: "x", does: "toggle 'error in labelling' (forces all unknown)" },
  { keys: "g", does: "group the selected agent with the previous one" },
  { keys: "b", does: "remove the selected agent from its group" },
  { keys: "Enter", does: "submit the image when every agent is complete" },
  { keys: "h or ?", does: "toggle this help panel" },
];
