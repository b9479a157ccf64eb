/** Payload shapes of the /api/v1 endpoints. The client never derives
 * numbers itself; everything rendered comes from these fields. */

export interface VariableSummary {
  name: string;
  kind: "numeric" | "categorical" | "binaryFork";
  enabled: boolean;
  isTarget: boolean;
  logScale: boolean;
  scaleMin: number;
  scaleMax: number;
  categories: string[];
  sourceVariable: string | null;
  degenerate: boolean;
  missingCount: number;
  distinctCount: number;
  mean?: number;
  std?: number;
  histogram?: number[];
  categoricalHint?: boolean;
}

export interface VariablesResponse {
  variables: VariableSummary[];
  threshold: number;
  target: string | null;
  highFraction: number | null;
  rows: number;
}

export interface TrainingStatus {
  state: "idle" | "running" | "done" | "failed";
  step: number;
  totalSteps: number;
  currentLoss: number;
  message: string;
}

export interface RankedVariable {
  index: number;
  name: string;
  rank: number;
  weight: number;
}

export interface RankingPayload {
  node: number;
  ranks: number[];
  order: number[];
  visible: number[];
  variables: RankedVariable[];
}

export interface StackedHistogramPayload {
  variable: number;
  name: string;
  inputBins: number;
  targetBins: number;
  weights: number[][];
  inputEdges: number[];
  targetEdges: number[];
}

export interface NodeCardPayload {
  node: number;
  weight: number;
  score: number;
  meanActivation: number;
  meanContribution: number;
  highCoverage: number;
  lowCoverage: number;
  targetHistogram: number[];
  coverageHistogram: number[];
  ranking: RankingPayload;
  stackedHistograms: StackedHistogramPayload[];
}

export interface NodesResponse {
  cards: NodeCardPayload[];
  coverageMode: string;
  inputBins: number;
  targetBins: number;
  threshold: number;
  highCount: number;
  lowCount: number;
}

export interface PcpColumn {
  index: number;
  name: string;
  rank: number;
}

export interface PcpItem {
  values: number[];
  contributing: boolean;
  target: number;
}

export interface PcpPayload {
  node: number;
  columns: PcpColumn[];
  items: PcpItem[];
}

export interface FilterSelection {
  variable: number;
  bins: number[];
}

export interface FilterRequest {
  selections: FilterSelection[];
  bins: number;
  modelId?: number;
}

export interface FilterResultPayload {
  matchedCount: number;
  matchedHighCount: number;
  highRecall: number;
  targetHistogram: number[];
  fisherP: number;
}

export interface ModelInfo {
  id: number;
  config: Record<string, number>;
  finalMse: number;
  nodes: number;
}
