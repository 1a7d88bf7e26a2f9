/* Scaffolding around unescape_string: string helpers of a parser
 * generator. */
#include <stdio.h>
#include <string.h>

#include "utility.h"

bool is_identifier_char(char ch, bool first)
{
    if (ch >= 'a' && ch <= 'z') return true;
    if (ch >= 'A' && ch <= 'Z') return true;
    if (!first && ch >= '0' && ch <= '9') return true;
    return ch == '_';
}

static int hex_value(char ch)
{
    if (ch >= '0' && ch <= '9') return ch - '0';
    if (ch >= 'a' && ch <= 'f') return ch - 'a' + 10;
    if (ch >= 'A' && ch <= 'F') return ch - 'A' + 10;
    return -1;
}

size_t unescape_string(char *str)
{
    size_t i, j = 0;
    for (i = 0; str[i]; i++) {
        if (str[i] == '\\') {
            i++;
            switch (str[i]) {
            case '\0': str[j++] = '\\'; str[j] = '\0'; return j;
            case '\'': str[j++] = '\''; break;
            case '\"': str[j++] = '\"'; break;
            case '0': str[j++] = '\x00'; break;
            case 'a': str[j++] = '\x07'; break;
            case 'b': str[j++] = '\x08'; break;
            case 'f': str[j++] = '\x0c'; break;
            case 'n': str[j++] = '\x0a'; break;
            case 'r': str[j++] = '\x0d'; break;
            case 't': str[j++] = '\x09'; break;
            case 'v': str[j++] = '\x0b'; break;
            case 'x':
                if (hex_value(str[i + 1]) >= 0 && hex_value(str[i + 2]) >= 0) {
                    str[j++] = (char)(hex_value(str[i + 1]) * 16 + hex_value(str[i + 2]));
                    i += 2;
                    break;
                }
                str[j++] = '\\'; str[j++] = str[i];
                break;
            case 'u':
                {
                    int k, v = 0;
                    for (k = 1; k <= 4 && hex_value(str[i + k]) >= 0; k++)
                        v = v * 16 + hex_value(str[i + k]);
                    if (k <= 4 || v >= 0x80) {
                        str[j++] = '\\'; str[j++] = str[i];
                        break;
                    }
                    str[j++] = (char)v;
                    i += 4;
                }
                break;
            case '\n': break;
            case '\r': if (str[i + 1] == '\n') i++; break;
            default: str[j++] = '\\'; str[j++] = str[i];
            }
        }
        else {
            str[j++] = str[i];
        }
    }
    str[j] = '\0';
    return j;
}

const char *escape_character(char ch, char (*buf)[5])
{
    switch (ch) {
    case '\x00': strcpy(*buf, "\\0"); break;
    case '\x07': strcpy(*buf, "\\a"); break;
    case '\x08': strcpy(*buf, "\\b"); break;
    case '\x0c': strcpy(*buf, "\\f"); break;
    case '\x0a': strcpy(*buf, "\\n"); break;
    case '\x0d': strcpy(*buf, "\\r"); break;
    case '\x09': strcpy(*buf, "\\t"); break;
    case '\x0b': strcpy(*buf, "\\v"); break;
    case '\\':  strcpy(*buf, "\\\\"); break;
    case '\'':  strcpy(*buf, "\\\'"); break;
    case '\"':  strcpy(*buf, "\\\""); break;
    default:
        if (ch >= '\x20' && ch < '\x7f')
            snprintf(*buf, 5, "%c", ch);
        else
            snprintf(*buf, 5, "\\x%02x", (unsigned char)ch);
    }
    return *buf;
}

size_t count_characters(const char *str, size_t start, size_t end)
{
    size_t n = 0, i;
    for (i = start; i < end && str[i]; i++) {
        if ((str[i] & 0xC0) != 0x80)
            n++;
    }
    return n;
}

bool match_class(const char *cls, char ch)
{
    size_t i, n = strlen(cls);
    for (i = 0; i < n; i++) {
        if (i + 2 < n && cls[i + 1] == '-') {
            if (ch >= cls[i] && ch <= cls[i + 2])
                return true;
            i += 2;
        } else if (cls[i] == ch) {
            return true;
        }
    }
    return false;
}
