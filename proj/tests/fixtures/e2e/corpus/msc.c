#include <stdio.h>
#include <stdlib.h>

void log_event(int id) {
  char *msg = malloc(64);
  if (!msg) return;
  snprintf(msg, 64, "event %d", id);
  puts(msg);
}

char *make_label(int id) {
  char *label = malloc(32);
  if (label) snprintf(label, 32, "L%d", id);
  return label;
}
