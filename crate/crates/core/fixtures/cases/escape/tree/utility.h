#ifndef UTILITY_H
#define UTILITY_H

#include <stdbool.h>
#include <stddef.h>

bool is_identifier_char(char ch, bool first);
size_t unescape_string(char *str);
const char *escape_character(char ch, char (*buf)[5]);
size_t count_characters(const char *str, size_t start, size_t end);
bool match_class(const char *cls, char ch);

#endif
