/** Application shell: variables tab, training controls, node cards,
 * filter interaction. State lives here; rendering is delegated. */

import { ApiClient, ApiError, LatestOnly } from "./api.js";
import { FilterDraft } from "./filterState.js";
import { createPcpView } from "./pcpView.js";
import {
  el,
  histogramStrip,
  renderFilterPanel,
  renderNodeCard,
  renderSidebarEntry,
} from "./render.js";
import { NodesResponse, VariablesResponse } from "./types.js";

interface DisplayOptions {
  inputBins: number;
  targetBins: number;
  coverageMode: "target" | "coverage";
}

export class App {
  api: ApiClient;
  root: HTMLElement;
  activeTab: "variables" | "neuralAnalysis" = "variables";
  variables: VariablesResponse | null = null;
  modelId: number | null = null;
  nodesResponse: NodesResponse | null = null;
  display: DisplayOptions = { inputBins: 10, targetBins: 2,
                              coverageMode: "target" };
  draft: FilterDraft = new FilterDraft(10);
  selectedNode: number | null = null;
  private nodesFetch = new LatestOnly();
  private filterFetch = new LatestOnly();

  constructor(root: HTMLElement, api: ApiClient) {
    this.root = root;
    this.api = api;
  }

  async start() {
    await this.api.createSession();
    this.renderShell();
  }

  private renderShell() {
    this.root.replaceChildren();
    const tabs = el("nav", "tabs");
    for (const [key, label] of [["variables", "Variables"],
                                ["neuralAnalysis", "Neural Analysis"]] as const) {
      const tab = el("button", "tab", label);
      if (this.activeTab === key) tab.classList.add("active");
      tab.addEventListener("click", () => {
        this.activeTab = key;
        this.renderShell();
      });
      tabs.appendChild(tab);
    }
    this.root.appendChild(tabs);
    const body = el("main", "tab-body");
    this.root.appendChild(body);
    if (this.activeTab === "variables") this.renderVariablesTab(body);
    else this.renderAnalysisTab(body);
  }

  private async withErrors(body: HTMLElement, task: () => Promise<void>) {
    try {
      await task();
    } catch (err) {
      const message = err instanceof ApiError
        ? `${err.status}: ${err.message}` : String(err);
      body.prepend(el("div", "error-banner", message));
    }
  }

  // ------------------------------------------------------------ variables

  private renderVariablesTab(body: HTMLElement) {
    const uploadRow = el("div", "upload-row");
    const input = el("input");
    input.type = "file";
    input.accept = ".csv,text/csv";
    input.addEventListener("change", () => {
      const file = input.files?.[0];
      if (!file) return;
      this.withErrors(body, async () => {
        this.variables = await this.api.uploadCsv(file);
        this.modelId = null;
        this.nodesResponse = null;
        this.renderShell();
      });
    });
    uploadRow.appendChild(input);
    body.appendChild(uploadRow);

    if (!this.variables) {
      body.appendChild(el("p", "hint", "Load a CSV to list its variables."));
      return;
    }

    const list = el("div", "variable-list");
    for (const v of this.variables.variables) {
      const row = el("div", "variable-row");
      if (!v.enabled) row.classList.add("disabled");

      const toggle = el("input");
      toggle.type = "checkbox";
      toggle.checked = v.enabled;
      toggle.addEventListener("change", () => this.patch(body, v.name,
        { enabled: toggle.checked }));
      row.appendChild(toggle);

      const target = el("button", "target-button", "(T)");
      if (v.isTarget) target.classList.add("active");
      target.addEventListener("click", () => this.patch(body, v.name,
        { isTarget: true }));
      row.appendChild(target);

      row.appendChild(el("span", "variable-name", v.name));
      const stats = v.kind === "numeric"
        ? `${v.kind}  mean ${v.mean?.toFixed(2) ?? "-"}  ` +
          `sd ${v.std?.toFixed(2) ?? "-"}`
        : `${v.kind}  ${v.categories.length} categories`;
      row.appendChild(el("span", "variable-stats",
        `${stats}  missing ${v.missingCount}`));

      if (v.kind === "numeric") {
        const log = el("label", "log-toggle", "log");
        const logBox = el("input");
        logBox.type = "checkbox";
        logBox.checked = v.logScale;
        logBox.addEventListener("change", () => this.patch(body, v.name,
          { logScale: logBox.checked }));
        log.prepend(logBox);
        row.appendChild(log);
      }
      if (v.kind === "categorical" && v.enabled) {
        const fork = el("button", "fork-button", "fork");
        fork.addEventListener("click", () => this.patch(body, v.name,
          { fork: true }));
        row.appendChild(fork);
      }
      if (v.histogram && v.histogram.length) {
        const max = Math.max(...v.histogram);
        row.appendChild(histogramStrip(v.histogram, (_i, count) => {
          const shade = max > 0 ? Math.round(224 * (1 - count / max)) : 224;
          return `rgb(${shade},${shade},${shade})`;
        }, "strip preview-strip"));
      }
      if (v.isTarget) {
        row.appendChild(this.thresholdSlider(body));
      }
      list.appendChild(row);
    }
    body.appendChild(list);
  }

  private thresholdSlider(body: HTMLElement): HTMLElement {
    const wrap = el("span", "threshold-wrap");
    const slider = el("input");
    slider.type = "range";
    slider.min = "0.01";
    slider.max = "0.99";
    slider.step = "0.01";
    slider.value = String(this.variables?.threshold ?? 0.5);
    slider.addEventListener("change", () => {
      this.withErrors(body, async () => {
        this.variables = await this.api.setThreshold(parseFloat(slider.value));
        this.renderShell();
      });
    });
    wrap.appendChild(slider);
    const fraction = this.variables?.highFraction;
    wrap.appendChild(el("span", "threshold-label",
      fraction == null ? "" : `(${(fraction * 100).toFixed(1)}% high)`));
    const median = el("button", "median-button", "median");
    median.addEventListener("click", () => {
      this.withErrors(body, async () => {
        this.variables = await this.api.setThreshold("median");
        this.renderShell();
      });
    });
    wrap.appendChild(median);
    return wrap;
  }

  private patch(body: HTMLElement, name: string,
                patch: Record<string, unknown>) {
    this.withErrors(body, async () => {
      this.variables = await this.api.patchVariable(name, patch);
      this.renderShell();
    });
  }

  // ------------------------------------------------------------- analysis

  private renderAnalysisTab(body: HTMLElement) {
    const controls = el("div", "train-controls");
    const mkNumber = (label: string, value: number, min: number,
                      max: number, step: number) => {
      const wrap = el("label", "train-field", label);
      const input = el("input");
      input.type = "number";
      input.min = String(min);
      input.max = String(max);
      input.step = String(step);
      input.value = String(value);
      wrap.appendChild(input);
      controls.appendChild(wrap);
      return input;
    };
    const nodes = mkNumber("hidden nodes", 20, 1, 200, 1);
    const iterations = mkNumber("iterations", 10000, 0, 1000000, 500);
    const beta = mkNumber("regularization", 0.1, 0, 5, 0.05);
    const seed = mkNumber("seed", 0, 0, 1e9, 1);

    const trainButton = el("button", "train-button", "Train");
    const status = el("span", "train-status", "");
    controls.append(trainButton, status);
    body.appendChild(controls);

    const targetPreview = el("div", "target-preview");
    body.appendChild(targetPreview);

    const layout = el("div", "analysis-layout");
    const sidebar = el("aside", "node-sidebar");
    const cardsBox = el("div", "cards-box");
    layout.append(sidebar, cardsBox);
    body.appendChild(layout);

    const displayBar = el("div", "display-bar");
    const mkRange = (label: string, value: number) => {
      const wrap = el("label", "display-field", label);
      const input = el("input");
      input.type = "range";
      input.min = "2";
      input.max = "20";
      input.step = "1";
      input.value = String(value);
      wrap.appendChild(input);
      displayBar.appendChild(wrap);
      return input;
    };
    const inputBins = mkRange("input bins", this.display.inputBins);
    const targetBins = mkRange("target bins", this.display.targetBins);
    const coverageToggle = el("button", "coverage-toggle", "node coverage");
    displayBar.appendChild(coverageToggle);
    body.appendChild(displayBar);

    const filterBox = el("div", "filter-box");
    body.appendChild(filterBox);
    const pcpBox = el("div", "pcp-box");
    body.appendChild(pcpBox);

    const refreshCards = () => this.withErrors(body, async () => {
      if (this.modelId === null) return;
      const response = await this.nodesFetch.run(() => this.api.nodes(
        this.modelId!, this.display.inputBins, this.display.targetBins,
        this.display.coverageMode));
      if (!response) return;  // a newer request superseded this one
      this.nodesResponse = response;
      this.renderCards(sidebar, cardsBox, filterBox, pcpBox, body);
    });

    inputBins.addEventListener("change", () => {
      this.display.inputBins = parseInt(inputBins.value, 10);
      this.draft.rebin(this.display.inputBins);
      refreshCards();
    });
    targetBins.addEventListener("change", () => {
      this.display.targetBins = parseInt(targetBins.value, 10);
      refreshCards();
    });
    coverageToggle.addEventListener("click", () => {
      this.display.coverageMode =
        this.display.coverageMode === "target" ? "coverage" : "target";
      refreshCards();
    });

    trainButton.addEventListener("click", () => this.withErrors(body,
      async () => {
        trainButton.disabled = true;
        const jobId = await this.api.startTraining({
          hiddenNodes: parseInt(nodes.value, 10),
          iterations: parseInt(iterations.value, 10),
          beta: parseFloat(beta.value),
          seed: parseInt(seed.value, 10),
        });
        status.textContent = "training...";
        const poll = async () => {
          const s = await this.api.trainingStatus();
          if (s.state === "running") {
            status.textContent =
              `training ${s.step}/${s.totalSteps} loss ${s.currentLoss.toExponential(2)}`;
            setTimeout(poll, 300);
            return;
          }
          trainButton.disabled = false;
          if (s.state === "done") {
            status.textContent = `done, loss ${s.currentLoss.toExponential(2)}`;
            this.modelId = jobId;
            this.draft.clear();
            refreshCards();
          } else {
            status.textContent = `failed: ${s.message}`;
          }
        };
        poll();
      }));

    if (this.nodesResponse) {
      this.renderCards(sidebar, cardsBox, filterBox, pcpBox, body);
    }
  }

  renderCards(sidebar: HTMLElement, cardsBox: HTMLElement,
              filterBox: HTMLElement, pcpBox: HTMLElement,
              errorHost: HTMLElement) {
    const response = this.nodesResponse;
    if (!response) return;
    sidebar.replaceChildren();
    cardsBox.replaceChildren();

    const onBarToggle = (variable: number, bin: number) => {
      this.draft.toggle(variable, bin);
      this.renderCards(sidebar, cardsBox, filterBox, pcpBox, errorHost);
      this.refreshFilter(filterBox, errorHost);
    };
    const onOpenPcp = (node: number) => this.withErrors(errorHost,
      async () => {
        const payload = await this.api.pcp(this.modelId!, node);
        pcpBox.replaceChildren(createPcpView(payload).root);
        this.selectedNode = node;
      });

    for (const card of response.cards) {
      sidebar.appendChild(renderSidebarEntry(card, response, onOpenPcp));
      cardsBox.appendChild(renderNodeCard(card, response, this.draft,
        { onBarToggle, onOpenPcp }));
    }
    if (!response.cards.length) {
      cardsBox.appendChild(el("div", "empty-state",
        "no active positive nodes in this model"));
    }
  }

  refreshFilter(filterBox: HTMLElement, errorHost: HTMLElement) {
    if (this.draft.empty) {
      filterBox.replaceChildren();  // deselecting the last bin hides the panel
      return;
    }
    this.withErrors(errorHost, async () => {
      const request = this.draft.toRequest(this.modelId ?? undefined);
      const result = await this.filterFetch.run(() =>
        this.api.evalFilter(request));
      if (!result) return;
      const total = this.variables?.rows ?? 0;
      filterBox.replaceChildren(renderFilterPanel(result, total));
    });
  }
}
