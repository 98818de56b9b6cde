/**
 * Lowercase alphanumeric-run tokenization, matching the harness exactly so
 * both sides agree on token identity.
 */
const TOKEN_RE = /[\p{L}\p{N}]+/gu;

export function tokenize(text: string): string[] {
  return text.toLowerCase().match(TOKEN_RE) ?? [];
}
