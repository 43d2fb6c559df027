// Browser entry point: DOM wiring around ViewState + HttpApi. All logic
// lives in the imported modules; this file only renders and routes events.

import { ApiRequestError, HttpApi } from "./api.js";
import { drawScene, hitTest, pan, zoomAt } from "./canvas.js";
import { SHORTCUT_LEGEND, actionForKey } from "./keyboard.js";
import { AgentView, Meta, Task, UNKNOWN } from "./model.js";
import { ViewState } from "./state.js";

const SKIN_SWATCHES: Record<string, string> = { light: "#e8c4a0", dark: "#6b4226" };

class App {
  api = new HttpApi("");
  meta!: Meta;
  state!: ViewState;
  task: Task | null = null;
  image: HTMLImageElement | null = null;
  focusedField = 0;
  helpOpen = false;
  canvas: HTMLCanvasElement;
  statusLine: HTMLElement;

  constructor() {
    this.canvas = document.getElementById("scene") as HTMLCanvasElement;
    this.statusLine = document.getElementById("status")!;
  }

  async start(): Promise<void> {
    this.meta = await this.api.meta();
    this.state = new ViewState(this.meta);
    const select = document.getElementById("dataset") as HTMLSelectElement;
    for (const dataset of this.meta.datasets) {
      const option = document.createElement("option");
      option.value = option.textContent = dataset;
      select.append(option);
    }
    document.getElementById("login-form")!.addEventListener("submit", async (event) => {
      event.preventDefault();
      const annotator = (document.getElementById("annotator") as HTMLInputElement).value.trim();
      try {
        await this.api.startSession(annotator, select.value);
        document.getElementById("login")!.hidden = true;
        document.getElementById("workbench")!.hidden = false;
        await this.nextTask();
      } catch (error) {
        this.showError(error);
      }
    });
    this.bindCanvas();
    this.bindKeyboard();
    document.getElementById("submit")!.addEventListener("click", () => void this.submit());
    document.getElementById("flag")!.addEventListener("click", () => void this.flag());
    this.renderHelp();
  }

  async nextTask(): Promise<void> {
    this.task = await this.api.getTask();
    if (this.task.status !== "ok" || !this.task.image) {
      document.getElementById("workbench")!.hidden = true;
      document.getElementById("complete")!.hidden = false;
      return;
    }
    this.state.loadTask(this.task);
    this.image = new Image();
    this.image.onload = () => this.render();
    this.image.onerror = () => {
      this.image = null;
      this.statusLine.textContent =
        `image unreachable: ${this.task?.image?.image_url} (boxes still shown; retry below)`;
      this.render();
    };
    this.image.src = this.task.image.image_url;
    this.render();
  }

  selectedAgent(): AgentView | null {
    return this.state.selectedAgent();
  }

  bindCanvas(): void {
    this.canvas.addEventListener("click", (event) => {
      const rect = this.canvas.getBoundingClientRect();
      const hit = hitTest(
        this.state.agents(),
        { x: event.clientX - rect.left, y: event.clientY - rect.top },
        this.state.viewport,
      );
      if (hit !== null) {
        this.state.select(this.state.agents().indexOf(hit));
        this.render();
      }
    });
    this.canvas.addEventListener("wheel", (event) => {
      event.preventDefault();
      const rect = this.canvas.getBoundingClientRect();
      const anchor = { x: event.clientX - rect.left, y: event.clientY - rect.top };
      this.state.viewport = zoomAt(this.state.viewport, anchor, event.deltaY < 0 ? 1.15 : 1 / 1.15);
      this.render();
    }, { passive: false });
    let dragging: { x: number; y: number } | null = null;
    this.canvas.addEventListener("mousedown", (event) => {
      if (event.button === 1 || event.shiftKey) dragging = { x: event.clientX, y: event.clientY };
    });
    window.addEventListener("mouseup", () => { dragging = null; });
    window.addEventListener("mousemove", (event) => {
      if (dragging !== null) {
        this.state.viewport = pan(this.state.viewport,
                                  event.clientX - dragging.x, event.clientY - dragging.y);
        dragging = { x: event.clientX, y: event.clientY };
        this.render();
      }
    });
  }

  bindKeyboard(): void {
    window.addEventListener("keydown", (event) => {
      if ((event.target as HTMLElement)?.tagName === "INPUT") return;
      const action = actionForKey(event.key, event.shiftKey);
      if (action.type === "none") return;
      event.preventDefault();
      const agent = this.selectedAgent();
      switch (action.type) {
        case "select_next": this.state.selectNext(1); break;
        case "select_prev": this.state.selectNext(-1); break;
        case "focus_field": this.focusedField = action.index; break;
        case "pick_option": {
          if (agent === null) break;
          const menu = this.state.renderModel().menu;
          const row = menu[this.focusedField];
          const option = row?.options[action.index];
          if (row && option !== undefined) this.state.setField(row.field, option);
          break;
        }
        case "set_unknown": {
          const menu = this.state.renderModel().menu;
          const row = menu[this.focusedField];
          if (row) this.state.setField(row.field, UNKNOWN);
          break;
        }
        case "toggle_not_clear": {
          const menu = this.state.renderModel().menu;
          const row = menu[this.focusedField];
          if (row) {
            this.state.setQualifier(row.field,
              row.qualifier === "not_clear" ? "clear" : "not_clear");
          }
          break;
        }
        case "toggle_error_flag": this.state.toggleErrorFlag(); break;
        case "link_selection": {
          if (agent !== null) {
            const index = this.state.agents().indexOf(agent);
            const previous = this.state.agents()[index - 1];
            if (previous !== undefined) {
              this.state.link([previous.agent_image_id, agent.agent_image_id]);
              void this.pushGroups();
            }
          }
          break;
        }
        case "unlink_selected": {
          if (agent !== null) {
            this.state.unlink(agent.agent_image_id);
            void this.pushGroups();
          }
          break;
        }
        case "submit": void this.submit(); break;
        case "toggle_help":
          this.helpOpen = !this.helpOpen;
          document.getElementById("help")!.hidden = !this.helpOpen;
          break;
      }
      this.render();
    });
  }

  async pushGroups(): Promise<void> {
    if (this.task?.image) {
      try {
        const echo = await this.api.setGroups(this.task.image.image_id, this.state.groupsPayload());
        this.state.groups = echo.groups.map((g) => ({ ...g, members: [...g.members] }));
      } catch (error) {
        this.showError(error);
      }
      this.render();
    }
  }

  async submit(): Promise<void> {
    if (!this.task?.image || !this.state.submitEnabled()) {
      const incomplete = this.state.agents().find((a) => !this.state.agentComplete(a));
      if (incomplete !== undefined) {
        this.state.select(this.state.agents().indexOf(incomplete));
        this.statusLine.textContent =
          `agent #${incomplete.agent_image_id} still needs attributes`;
        this.render();
      }
      return;
    }
    try {
      for (const agent of this.state.agents()) {
        await this.api.submitAnnotation({
          agentUuid: agent.uuid,
          imageId: this.task.image.image_id,
          attributes: this.state.payloadFor(agent),
          errorInLabelling: this.state.errorFlags.get(agent.uuid) ?? false,
        });
      }
      this.statusLine.textContent = "";
      await this.nextTask();
    } catch (error) {
      this.showError(error);
    }
  }

  async flag(): Promise<void> {
    if (this.task?.image) {
      await this.api.flagImage(this.task.image.image_id, "flagged from UI");
      await this.nextTask();
    }
  }

  showError(error: unknown): void {
    if (error instanceof ApiRequestError) {
      this.statusLine.textContent = `${error.message} ${error.details.join("; ")}`;
      const field = error.details[0]?.split(":")[0];
      if (field) {
        document.querySelector(`[data-field-row="${field}"]`)?.classList.add("error");
      }
    } else {
      this.statusLine.textContent = String(error);
    }
  }

  renderHelp(): void {
    const help = document.getElementById("help")!;
    const rows = SHORTCUT_LEGEND
      .map((s) => `<tr><td><code>${s.keys}</code></td><td>${s.does}</td></tr>`)
      .join("");
    help.innerHTML = `<h3>Shortcuts</h3><table>${rows}</table>
      <h3>Working rules</h3>
      <ul>
        <li>Short, planned sessions beat long ones; stop at your objective.</li>
        <li>Unknown is always a legal answer; add "not clear" when hesitant.</li>
        <li>Wrong source label? Toggle the error flag: everything goes unknown.</li>
        <li>Group people who decide together; proposals are editable.</li>
      </ul>`;
  }

  render(): void {
    const model = this.state.renderModel();
    const progress = document.getElementById("progress")!;
    progress.textContent =
      `${model.progress.agentsDone} / ${model.progress.goal} agents · ` +
      `${model.progress.imagesDone} images`;
    const tabs = document.getElementById("tabs")!;
    tabs.innerHTML = "";
    model.tabs.forEach((tab, i) => {
      const button = document.createElement("button");
      button.textContent = tab.label + (tab.complete ? " ✓" : "");
      button.className = tab.selected ? "tab selected" : "tab";
      button.addEventListener("click", () => { this.state.select(i); this.render(); });
      tabs.append(button);
    });
    this.renderMenu(model.menu);
    (document.getElementById("submit") as HTMLButtonElement).disabled = !model.submitEnabled;
    const ctx = this.canvas.getContext("2d");
    if (ctx !== null) {
      const completeness = new Map(
        this.state.agents().map((a) => [a.uuid, this.state.agentComplete(a)]),
      );
      drawScene(ctx, this.image, this.state.agents(), this.state.groups,
                this.selectedAgent()?.uuid ?? null, completeness, this.state.viewport);
    }
  }

  renderMenu(menu: ReturnType<ViewState["renderModel"]>["menu"]): void {
    const host = document.getElementById("menu")!;
    host.innerHTML = "";
    menu.forEach((row, rowIndex) => {
      const div = document.createElement("div");
      div.className = "field-row" + (rowIndex === this.focusedField ? " focused" : "");
      div.dataset.fieldRow = row.field;
      const label = document.createElement("span");
      label.className = "field-name";
      label.textContent = row.field.replace(/_/g, " ");
      div.append(label);
      for (const option of row.options) {
        const button = document.createElement("button");
        button.className = "option" + (row.value === option ? " picked" : "");
        if (row.field === "skin" && option in SKIN_SWATCHES) {
          button.style.background = SKIN_SWATCHES[option];
          button.title = option;
          button.textContent = "   ";
        } else {
          button.textContent = option;
        }
        button.addEventListener("click", () => {
          this.focusedField = rowIndex;
          this.state.setField(row.field, option);
          this.render();
        });
        div.append(button);
      }
      if (row.value === UNKNOWN && this.selectedAgent()?.kind === "person") {
        const toggle = document.createElement("button");
        toggle.className = "option qualifier" + (row.qualifier === "not_clear" ? " picked" : "");
        toggle.textContent = "not clear";
        toggle.addEventListener("click", () => {
          this.state.setQualifier(row.field,
            row.qualifier === "not_clear" ? "clear" : "not_clear");
          this.render();
        });
        div.append(toggle);
      }
      host.append(div);
    });
  }
}

if (typeof document !== "undefined" && document.getElementById("scene") !== null) {
  void new App().start();
}
