// JSON message schemas spoken by the control service (schema_version 1).

export interface SlotView {
  denoise: number;
  step: number;
  schedule_id: string;
}

export interface CompletionView {
  completion_index: number;
  submission_id: number;
  schedule_id: string;
  denoise: number;
  hybrid: boolean;
  decode_skipped: boolean;
  rms_vs_reference: number | null;
}

export interface TelemetryRecord {
  schema_version: number;
  tick: number;
  denoise: number;
  mode: string;
  queue_depth: number;
  registry_digest: string;
  slots: (SlotView | null)[];
  completions: CompletionView[];
  /** cumulative per-subscriber drop count, present on streamed events */
  dropped?: number;
}

export interface TelemetrySnapshot {
  schema_version: number;
  running: boolean;
  config?: SessionConfig | null;
  tick?: number;
  mode?: string;
  denoise?: number;
  recent: TelemetryRecord[];
}

export interface SessionConfig {
  seed?: number;
  depth?: number;
  steps?: number;
  frames?: number;
  channels?: number;
  mode?: "per-slot" | "global-reset" | "migration";
  denoise?: number;
  tick_rate?: number;
  max_rate?: boolean;
  max_ticks?: number;
  similarity_threshold?: number;
  model_jitter?: number;
  prompt?: string;
  hint_strength?: number;
  timbre_strength?: number;
  source_seed?: number | null;
}

export interface ControlMessage {
  op: "set_denoise" | "set_shared_curve" | "set_model_weights" | "set_mode" | "set_request";
  value?: number;
  name?: string;
  curve?: number | number[] | number[][];
  offset?: number[][];
  mode?: string;
  prompt?: string;
  hint_strength?: number;
  timbre_strength?: number;
  source_seed?: number;
  curves?: Record<string, number | number[]>;
}

export interface ControlAck {
  op: string;
  visible_tick: number;
}

export interface PcmChunk {
  header: { hop: number; start_frame: number; frame_count: number };
  samples: Int16Array;
}
