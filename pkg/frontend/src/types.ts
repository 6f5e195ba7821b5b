// Wire types for the aa HTTP API.

export interface FeedEntry {
  id: number;
  server_ts: string;
  client_ts: string;
  author: string;
  text: string;
  session_id: string;
}

export interface FeedPage {
  entries: FeedEntry[];
  next_cursor: string | null;
}

export interface ShoutRow {
  id: number;
  text: string;
  client_ts: string;
  server_ts: string;
  origin: string;
}

export interface SessionSummary {
  session_id: string;
  author: string;
  shout_count: number;
  started_at: string;
  ended_at: string;
  duration_s: number;
  screencast_url: string | null;
  validation_state: 'pending' | 'assigned' | 'valid' | 'invalid';
}

export interface SessionDetail extends SessionSummary {
  shouts: ShoutRow[];
  mean_intershout_gap_s: number;
  validated_by: string | null;
  validation_comment: string | null;
}

export interface Assignment {
  token: string;
  session_id: string;
  session_author: string;
  validator: string;
  assigned_at: string;
  verdict: 'valid' | 'invalid' | null;
  comment: string | null;
  decided_at: string | null;
}

export interface ValidationDetail {
  assignment: Assignment;
  session: SessionDetail | null;
}
