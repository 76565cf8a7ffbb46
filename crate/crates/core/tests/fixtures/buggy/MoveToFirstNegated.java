package org.example.contacts;

import android.database.Cursor;
import android.database.sqlite.SQLiteDatabase;

public class MoveToFirstNegated {
    private SQLiteDatabase db;

    long lookupId(String name) {
        Cursor cursor = db.rawQuery("SELECT _id FROM people WHERE name = ?", new String[] { name });
        if (!cursor.moveToFirst()) { // LEAK: move_to_first
            return -1;
        }
        long id = cursor.getLong(0);
        cursor.close();
        return id;
    }

    boolean hasRows(String table) {
        Cursor c = db.query(table, null, null, null, null, null, null);
        boolean found = c.moveToFirst();
        if (found == true) { // LEAK: move_to_first
            c.close();
            return true;
        }
        return false;
    }
}
